"""Physical parameters of the pinned planar five-link walker.

Link order is (stance tibia, stance femur, torso, swing femur, swing tibia).
Joint coordinates q = (q_sf, q_sk, q_sh, q_nsh, q_nsk) are relative angles
except the stance foot angle, which is absolute; cumulative sums of q give
each link's absolute angle measured from the vertical, so q = 0 is the
fully extended upright configuration. The walking direction is +x and the
stance foot is pinned at the origin.

The dynamics of this chain reduce to constant coefficient arrays (built
here) contracted against trig terms of the absolute angles; see chain
kernels for the contraction.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import yaml

LINK_NAMES = ("stance_tibia", "stance_femur", "torso", "swing_femur",
              "swing_tibia")
NQ = 5


@dataclass(frozen=True)
class LinkParams:
    mass: float      # kg
    length: float    # m, joint-to-joint (torso: to its free end)
    com: float       # m, center of mass offset from the proximal joint
    inertia: float   # kg m^2 about the center of mass

    def __post_init__(self):
        if self.mass < 0 or self.length <= 0 or self.inertia < 0:
            raise ValueError("link mass/length/inertia out of range")
        if not 0 <= self.com <= self.length:
            raise ValueError("com offset must lie within the link")


@dataclass(frozen=True)
class BipedParameters:
    links: tuple
    gravity: float = 9.81
    inertia_scale: float = 1.0

    def __post_init__(self):
        if len(self.links) != 5:
            raise ValueError("exactly five links expected")
        if self.inertia_scale <= 0:
            raise ValueError("inertia_scale must be positive")

    @property
    def l_t(self):
        return self.links[0].length

    @property
    def l_f(self):
        return self.links[1].length

    def with_inertia_scale(self, scale):
        return BipedParameters(links=self.links, gravity=self.gravity,
                               inertia_scale=scale)


@dataclass
class BipedState:
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(NQ)
        self.qd = np.asarray(self.qd, dtype=float).reshape(NQ)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd))):
            raise ValueError("state entries must be finite")

    def vector(self):
        return np.concatenate([self.q, self.qd])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float).reshape(2 * NQ)
        return cls(q=x[:NQ], qd=x[NQ:])


@dataclass(frozen=True)
class ChainCoefficients:
    """Constant arrays that determine the chain dynamics.

    P[k, l] multiplies cos/sin of the angle difference between links k and
    l in the inertia/Coriolis contractions, grav[k] multiplies sin of link
    k's absolute angle in the gravity vector, inertia is the (scaled)
    rotational inertia per link, and swing[k] are the signed length
    coefficients of the swing-foot position over link directions.
    """

    P: np.ndarray
    inertia: np.ndarray
    grav: np.ndarray
    swing: np.ndarray
    g0: float


def _coefficient_rows(p):
    l = [lk.length for lk in p.links]
    c = [lk.com for lk in p.links]
    r = np.zeros((5, 5))
    r[0, 0] = c[0]
    r[1, :2] = (l[0], c[1])
    r[2, :3] = (l[0], l[1], c[2])
    r[3, :4] = (l[0], l[1], 0.0, -c[3])
    r[4, :5] = (l[0], l[1], 0.0, -l[3], -c[4])
    return r


@lru_cache(maxsize=32)
def chain_coefficients(p):
    m = np.array([lk.mass for lk in p.links])
    inertia = p.inertia_scale * np.array([lk.inertia for lk in p.links])
    r = _coefficient_rows(p)
    P = r.T @ (m[:, None] * r)
    grav = r.T @ m
    l = [lk.length for lk in p.links]
    swing = np.array([l[0], l[1], 0.0, -l[3], -l[4]])
    return ChainCoefficients(P=P, inertia=inertia, grav=grav, swing=swing,
                             g0=p.gravity)


def load_biped_params(path):
    """Read a robot parameter file (YAML key/value format)."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    links = tuple(LinkParams(**raw["links"][name]) for name in LINK_NAMES)
    return BipedParameters(links=links,
                           gravity=float(raw.get("gravity", 9.81)),
                           inertia_scale=float(raw.get("inertia_scale", 1.0)))


def save_biped_params(p, path):
    raw = {
        "gravity": float(p.gravity),
        "inertia_scale": float(p.inertia_scale),
        "links": {name: {"mass": lk.mass, "length": lk.length,
                         "com": lk.com, "inertia": lk.inertia}
                  for name, lk in zip(LINK_NAMES, p.links)},
    }
    with open(path, "w") as fh:
        yaml.safe_dump(raw, fh, sort_keys=False)
