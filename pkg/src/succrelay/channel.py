"""Network geometries and fading channel realizations.

A frame sees six quasi-static links: source-destination, source to each
relay, the inter-relay link, and each relay to destination.  Every link
coefficient is drawn as

    h = v * sqrt(d**-gamma * 10**(zeta / 10))

where ``v`` is a unit-variance circularly-symmetric complex Gaussian
(Rayleigh fading), ``d`` the link distance, ``gamma`` the pathloss
exponent and ``zeta ~ Normal(0 dB, shadow_sigma_db**2)`` a lognormal
shadowing term.  Shadowing is redrawn independently per link and per
realization; the channel is block fading (one realization per frame).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

LINK_NAMES = ("sd", "sr1", "sr2", "r1r2", "r1d", "r2d")

# Case III only pins the inter-relay spacing as negligible next to the
# source-relay distance.  0.05 (a tenth of d_sr) keeps the mean inter-relay
# gain dominant (0.05**-4 = 160,000) without float-range pathologies.
CASE_III_RELAY_SPACING = 0.05

_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class NetworkGeometry:
    """Node distances plus propagation parameters.

    Distances are unitless, normalized so that source-destination is 1.

    Attributes:
        d_sd: source to destination distance.
        d_sr1, d_sr2: source to relay distances.
        d_r1d, d_r2d: relay to destination distances.
        d_r1r2: inter-relay distance.
        gamma: pathloss exponent.
        shadow_sigma_db: lognormal shadowing standard deviation in dB.
    """

    d_sd: float
    d_sr1: float
    d_sr2: float
    d_r1d: float
    d_r2d: float
    d_r1r2: float
    gamma: float = 4.0
    shadow_sigma_db: float = 8.0

    def __post_init__(self) -> None:
        for name in ("d_sd", "d_sr1", "d_sr2", "d_r1d", "d_r2d", "d_r1r2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.gamma > 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.shadow_sigma_db < 0.0:
            raise ValueError(
                f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}"
            )

    def link_distances(self) -> np.ndarray:
        """Distances of the six links, in LINK_NAMES order."""
        return np.array(
            [self.d_sd, self.d_sr1, self.d_sr2, self.d_r1r2, self.d_r1d, self.d_r2d]
        )


def preset_geometry(case_id: str, relay_spacing: float | None = None) -> NetworkGeometry:
    """Return one of the three canonical network geometries.

    Case I:   relays at unit distance from both endpoints; the inter-relay
              spacing is then sqrt(3).
    Case II:  unit inter-relay distance, source/destination at 1/sqrt(2)
              from each relay.
    Case III: relays midway between the endpoints (d = 1/2) and nearly
              co-located (inter-relay spacing CASE_III_RELAY_SPACING,
              overridable via ``relay_spacing``).

    All presets use gamma = 4 and 8 dB shadowing.
    """
    case = str(case_id).strip().upper()
    if case == "I":
        d_sr = d_rd = 1.0
        d_rr = _SQRT3
    elif case == "II":
        d_sr = d_rd = 1.0 / _SQRT2
        d_rr = 1.0
    elif case == "III":
        d_sr = d_rd = 0.5
        d_rr = CASE_III_RELAY_SPACING
    else:
        raise ValueError(f"unknown geometry case {case_id!r}; expected I, II or III")
    if relay_spacing is not None:
        d_rr = float(relay_spacing)
    return NetworkGeometry(
        d_sd=1.0, d_sr1=d_sr, d_sr2=d_sr, d_r1d=d_rd, d_r2d=d_rd, d_r1r2=d_rr
    )


@dataclass(frozen=True)
class ChannelRealization:
    """The six complex link coefficients of one frame."""

    h_sd: complex
    h_sr1: complex
    h_sr2: complex
    h_r1r2: complex
    h_r1d: complex
    h_r2d: complex

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError(f"{f.name} must be finite, got {v}")

    def gains(self) -> dict[str, float]:
        """Squared magnitudes of all links keyed by LINK_NAMES."""
        return {
            "sd": abs(self.h_sd) ** 2,
            "sr1": abs(self.h_sr1) ** 2,
            "sr2": abs(self.h_sr2) ** 2,
            "r1r2": abs(self.h_r1r2) ** 2,
            "r1d": abs(self.h_r1d) ** 2,
            "r2d": abs(self.h_r2d) ** 2,
        }


@dataclass(frozen=True)
class ChannelBatch:
    """Vectorized stack of realizations; each field is a complex (n,) array."""

    h_sd: np.ndarray
    h_sr1: np.ndarray
    h_sr2: np.ndarray
    h_r1r2: np.ndarray
    h_r1d: np.ndarray
    h_r2d: np.ndarray

    def __len__(self) -> int:
        return self.h_sd.shape[0]

    def realization(self, i: int) -> ChannelRealization:
        return ChannelRealization(
            h_sd=complex(self.h_sd[i]),
            h_sr1=complex(self.h_sr1[i]),
            h_sr2=complex(self.h_sr2[i]),
            h_r1r2=complex(self.h_r1r2[i]),
            h_r1d=complex(self.h_r1d[i]),
            h_r2d=complex(self.h_r2d[i]),
        )

    @classmethod
    def from_realization(cls, real: ChannelRealization) -> "ChannelBatch":
        return cls(
            h_sd=np.array([real.h_sd]),
            h_sr1=np.array([real.h_sr1]),
            h_sr2=np.array([real.h_sr2]),
            h_r1r2=np.array([real.h_r1r2]),
            h_r1d=np.array([real.h_r1d]),
            h_r2d=np.array([real.h_r2d]),
        )

    @classmethod
    def concatenate(cls, batches: list["ChannelBatch"]) -> "ChannelBatch":
        return cls(
            *(
                np.concatenate([getattr(b, f.name) for b in batches])
                for f in fields(cls)
            )
        )


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent random stream for one trial.

    Streams are keyed by (seed, trial) through a splittable seed sequence,
    so trial t's draws do not depend on execution order or worker count.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial),))
    )


def sample_realizations(
    geom: NetworkGeometry, rng: np.random.Generator, n: int
) -> ChannelBatch:
    """Draw ``n`` independent channel realizations from one stream.

    Draw order is fixed (Gaussian re/im parts, then shadowing) so a given
    generator state always yields the same batch.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    d = geom.link_distances()
    v = rng.standard_normal((2, 6, n))
    fading = (v[0] + 1j * v[1]) / _SQRT2
    amp = d[:, None] ** (-geom.gamma / 2.0)
    if geom.shadow_sigma_db > 0.0:
        zeta = rng.normal(0.0, geom.shadow_sigma_db, size=(6, n))
        amp = amp * 10.0 ** (zeta / 20.0)
    h = fading * amp
    return ChannelBatch(h[0], h[1], h[2], h[3], h[4], h[5])


def sample_realization(
    geom: NetworkGeometry, rng: np.random.Generator
) -> ChannelRealization:
    """Draw a single channel realization (see sample_realizations)."""
    return sample_realizations(geom, rng, 1).realization(0)
