"""Synthetic field proxy: maps a 90-variable decision vector (3 new well
placements + per-well BHP controls over 4 periods) to per-period fluid
volumes, and computes the WCF and NPV objectives from them.

The field is a box of 9000 x 3000 x 50 m with a smooth, multimodal
permeability built from Gaussian bumps. Wells do not interact: each well's
rate is its productivity index times the pressure drawdown, with a field-
wide pressure decline and a rising water cut over the four 5-year periods.
This is deliberately simple plumbing - a stand-in with the right shape for
an expensive reservoir simulator, not reservoir physics.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .utils import rng_from_seed

FIELD_SIZE = (9000.0, 3000.0, 50.0)
N_PERIODS = 4
PERIOD_YEARS = 5.0
N_NEW_WELLS = 3
N_PRODUCERS = 11          # 3 new + 8 existing
N_INJECTORS = 7
N_WELLS = N_PRODUCERS + N_INJECTORS
N_PLACEMENT_VARS = N_NEW_WELLS * 6
N_CONTROL_VARS = N_WELLS * N_PERIODS
N_DECISION_VARS = N_PLACEMENT_VARS + N_CONTROL_VARS  # 90

PRODUCER_BHP = (150.0, 250.0)
INJECTOR_BHP = (250.0, 350.0)


@dataclass
class ProxyField:
    """Deterministic synthetic field descriptor."""

    bump_centers: np.ndarray      # (K, 3)
    bump_amps: np.ndarray         # (K,) > 0
    bump_radii: np.ndarray        # (K,) > 0
    existing_heels: np.ndarray    # (15, 3), producers first
    existing_toes: np.ndarray     # (15, 3)
    p0: float = 250.0             # initial reservoir pressure, bar
    decline: float = 0.05         # fractional pressure decline per period
    tau_w: float = 3.0            # water-cut time constant, periods
    rate_coef: float = 1.0
    seed: int = 0

    @classmethod
    def random(cls, seed: int, n_bumps: int = 12) -> "ProxyField":
        rng = rng_from_seed(seed)
        size = np.asarray(FIELD_SIZE)
        centers = rng.uniform(0.0, 1.0, size=(n_bumps, 3)) * size
        amps = rng.uniform(0.5, 2.0, size=n_bumps)
        radii = rng.uniform(500.0, 2000.0, size=n_bumps)
        n_exist = N_WELLS - N_NEW_WELLS
        heels = rng.uniform(0.0, 1.0, size=(n_exist, 3)) * size
        offsets = rng.uniform(-800.0, 800.0, size=(n_exist, 3))
        offsets[:, 2] = rng.uniform(-20.0, 20.0, size=n_exist)
        toes = np.clip(heels + offsets, 0.0, size)
        return cls(bump_centers=centers, bump_amps=amps, bump_radii=radii,
                   existing_heels=heels, existing_toes=toes, seed=seed)

    def permeability(self, points: np.ndarray) -> np.ndarray:
        """Sum of Gaussian bumps, strictly positive; points (..., 3)."""
        d2 = np.sum((points[..., None, :] - self.bump_centers) ** 2, axis=-1)
        return np.sum(self.bump_amps * np.exp(-d2 / (2.0 * self.bump_radii ** 2)),
                      axis=-1)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "bump_centers": self.bump_centers.tolist(),
            "bump_amps": self.bump_amps.tolist(),
            "bump_radii": self.bump_radii.tolist(),
            "existing_heels": self.existing_heels.tolist(),
            "existing_toes": self.existing_toes.tolist(),
            "p0": self.p0, "decline": self.decline, "tau_w": self.tau_w,
            "rate_coef": self.rate_coef, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProxyField":
        if d.get("format_version") != 1:
            raise DataError(f"unsupported field descriptor version: "
                            f"{d.get('format_version')}")
        return cls(
            bump_centers=np.asarray(d["bump_centers"], dtype=np.float64),
            bump_amps=np.asarray(d["bump_amps"], dtype=np.float64),
            bump_radii=np.asarray(d["bump_radii"], dtype=np.float64),
            existing_heels=np.asarray(d["existing_heels"], dtype=np.float64),
            existing_toes=np.asarray(d["existing_toes"], dtype=np.float64),
            p0=d["p0"], decline=d["decline"], tau_w=d["tau_w"],
            rate_coef=d["rate_coef"], seed=d["seed"])

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path) -> "ProxyField":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def decision_bounds() -> np.ndarray:
    """(90, 2) lower/upper bounds: 18 placement coordinates then 72 BHPs
    (well-major, period-minor; producers are wells 0..10, injectors 11..17;
    the 3 new wells are producers 0..2)."""
    b = np.zeros((N_DECISION_VARS, 2))
    axis_hi = np.tile(FIELD_SIZE, N_NEW_WELLS * 2)
    b[:N_PLACEMENT_VARS, 1] = axis_hi
    for w in range(N_WELLS):
        lo, hi = PRODUCER_BHP if w < N_PRODUCERS else INJECTOR_BHP
        s = N_PLACEMENT_VARS + w * N_PERIODS
        b[s:s + N_PERIODS, 0] = lo
        b[s:s + N_PERIODS, 1] = hi
    return b


@dataclass
class FluidVolumes:
    """Per-period produced/injected volumes (m^3) and their totals."""

    oil: np.ndarray           # (4,)
    water_produced: np.ndarray
    water_injected: np.ndarray

    @property
    def q_op(self) -> float:
        return float(np.sum(self.oil))

    @property
    def q_wp(self) -> float:
        return float(np.sum(self.water_produced))

    @property
    def q_wi(self) -> float:
        return float(np.sum(self.water_injected))


def wcf(v: FluidVolumes) -> float:
    """Weighted cumulative fluid: total oil minus 0.1x the produced plus
    injected water."""
    return v.q_op - 0.1 * (v.q_wp + v.q_wi)


@dataclass
class EconomicParams:
    """Prices/costs per m^3, per-component discount rates, and drilling
    cash flows (negative = cost) for the newly drilled wells."""

    oil_price: float = 45.0
    water_prod_cost: float = -3.0
    water_inj_cost: float = -3.0
    discount_oil: float = 0.08
    discount_water_prod: float = 0.08
    discount_water_inj: float = 0.08
    drill_cash: tuple[float, ...] = (-8e6, -8e6, -8e6)

    @classmethod
    def wcf_equivalent(cls) -> "EconomicParams":
        """Undiscounted, drilling-free configuration under which NPV equals
        WCF exactly."""
        return cls(oil_price=1.0, water_prod_cost=-0.1, water_inj_cost=-0.1,
                   discount_oil=0.0, discount_water_prod=0.0,
                   discount_water_inj=0.0, drill_cash=())

    def to_dict(self) -> dict:
        return {"oil_price": self.oil_price,
                "water_prod_cost": self.water_prod_cost,
                "water_inj_cost": self.water_inj_cost,
                "discount_oil": self.discount_oil,
                "discount_water_prod": self.discount_water_prod,
                "discount_water_inj": self.discount_water_inj,
                "drill_cash": list(self.drill_cash)}

    @classmethod
    def from_dict(cls, d: dict) -> "EconomicParams":
        kw = dict(d)
        if "drill_cash" in kw:
            kw["drill_cash"] = tuple(kw["drill_cash"])
        return cls(**kw)


def npv(v: FluidVolumes, econ: EconomicParams) -> float:
    """Discounted cash flow summed over components and periods, plus
    drilling cash flows."""
    tau = np.arange(1, N_PERIODS + 1)
    total = 0.0
    for q, price, d in ((v.oil, econ.oil_price, econ.discount_oil),
                        (v.water_produced, econ.water_prod_cost,
                         econ.discount_water_prod),
                        (v.water_injected, econ.water_inj_cost,
                         econ.discount_water_inj)):
        total += float(np.sum(q * price / (1.0 + d) ** (tau - 1)))
    return total + float(sum(econ.drill_cash))


def clamp_decisions(d: np.ndarray, bounds: np.ndarray | None = None):
    """Clip decisions into bounds; returns (clamped, any_clamped)."""
    if bounds is None:
        bounds = decision_bounds()
    clamped = np.clip(d, bounds[:, 0], bounds[:, 1])
    return clamped, bool(np.any(clamped != d))


def _well_geometry(d_batch: np.ndarray, fld: ProxyField):
    """Heel/toe arrays (N, 18, 3) for all wells of each decision row."""
    n = d_batch.shape[0]
    place = d_batch[:, :N_PLACEMENT_VARS].reshape(n, N_NEW_WELLS, 2, 3)
    heels = np.empty((n, N_WELLS, 3))
    toes = np.empty((n, N_WELLS, 3))
    heels[:, :N_NEW_WELLS] = place[:, :, 0]
    toes[:, :N_NEW_WELLS] = place[:, :, 1]
    heels[:, N_NEW_WELLS:] = fld.existing_heels
    toes[:, N_NEW_WELLS:] = fld.existing_toes
    return heels, toes


def productivity_index(heels: np.ndarray, toes: np.ndarray,
                       fld: ProxyField) -> np.ndarray:
    """Mean permeability at 5 equidistant points along the heel-toe
    segment, scaled by segment length. Shapes (..., 3) -> (...)."""
    ts = np.linspace(0.0, 1.0, 5)
    pts = heels[..., None, :] + ts[:, None] * (toes - heels)[..., None, :]
    perm = fld.permeability(pts).mean(axis=-1)
    length = np.linalg.norm(toes - heels, axis=-1)
    return perm * length


def simulate_batch(decisions: np.ndarray, fld: ProxyField,
                   noise_std: float = 0.0, seed: int = 0,
                   warn_on_clamp: bool = True) -> dict:
    """Vectorized proxy run over (N, 90) decisions.

    Returns a dict of (N, n_wells, 4) per-well, per-period volumes under
    keys 'oil', 'water_produced', 'water_injected'. Out-of-bounds decision
    values are clamped (and flagged with a warning). With noise_std > 0,
    each volume is scaled by a clipped (1 + Gaussian) relative factor drawn
    from a per-row stream, so row i's volumes depend only on (seed, i).
    """
    decisions = np.atleast_2d(np.asarray(decisions, dtype=np.float64))
    if decisions.shape[1] != N_DECISION_VARS:
        raise ConfigError(f"decision vectors must have {N_DECISION_VARS} "
                          f"entries, got {decisions.shape[1]}")
    d, was_clamped = clamp_decisions(decisions)
    if was_clamped and warn_on_clamp:
        warnings.warn("out-of-bounds decision values were clamped to bounds")
    n = d.shape[0]
    heels, toes = _well_geometry(d, fld)
    pi = productivity_index(heels, toes, fld) * fld.rate_coef  # (N, 18)
    bhp = d[:, N_PLACEMENT_VARS:].reshape(n, N_WELLS, N_PERIODS)
    tau = np.arange(1, N_PERIODS + 1)
    p_res = fld.p0 * (1.0 - fld.decline * tau)            # (4,)
    wc = 1.0 - np.exp(-tau / fld.tau_w)                    # (4,)

    drawdown = np.maximum(0.0, p_res - bhp[:, :N_PRODUCERS])
    prod_rate = pi[:, :N_PRODUCERS, None] * drawdown
    inj_rate = pi[:, N_PRODUCERS:, None] * np.maximum(
        0.0, bhp[:, N_PRODUCERS:] - p_res)

    oil = np.zeros((n, N_WELLS, N_PERIODS))
    wat_p = np.zeros((n, N_WELLS, N_PERIODS))
    wat_i = np.zeros((n, N_WELLS, N_PERIODS))
    oil[:, :N_PRODUCERS] = prod_rate * (1.0 - wc) * PERIOD_YEARS
    wat_p[:, :N_PRODUCERS] = prod_rate * wc * PERIOD_YEARS
    wat_i[:, N_PRODUCERS:] = inj_rate * PERIOD_YEARS

    if noise_std > 0.0:
        for i in range(n):
            rng = np.random.default_rng([seed, i])
            for arr in (oil, wat_p, wat_i):
                factor = 1.0 + rng.normal(0.0, noise_std, size=arr.shape[1:])
                arr[i] *= np.maximum(factor, 0.0)
    return {"oil": oil, "water_produced": wat_p, "water_injected": wat_i}


def simulate(decision: np.ndarray, fld: ProxyField, noise_std: float = 0.0,
             seed: int = 0) -> FluidVolumes:
    """Single-decision proxy run, aggregated over wells."""
    per_well = simulate_batch(np.atleast_2d(decision), fld,
                              noise_std=noise_std, seed=seed)
    return FluidVolumes(oil=per_well["oil"][0].sum(axis=0),
                        water_produced=per_well["water_produced"][0].sum(axis=0),
                        water_injected=per_well["water_injected"][0].sum(axis=0))


def objective_batch(decisions: np.ndarray, fld: ProxyField, objective: str,
                    econ: EconomicParams | None = None,
                    noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Objective values for (N, 90) decisions; objective is 'wcf' or 'npv'."""
    per_well = simulate_batch(decisions, fld, noise_std=noise_std, seed=seed)
    oil = per_well["oil"].sum(axis=1)
    wp = per_well["water_produced"].sum(axis=1)
    wi = per_well["water_injected"].sum(axis=1)
    if objective == "wcf":
        return oil.sum(axis=1) - 0.1 * (wp.sum(axis=1) + wi.sum(axis=1))
    if objective == "npv":
        econ = econ or EconomicParams()
        tau = np.arange(1, N_PERIODS + 1)
        out = (oil * econ.oil_price / (1.0 + econ.discount_oil) ** (tau - 1)).sum(axis=1)
        out += (wp * econ.water_prod_cost
                / (1.0 + econ.discount_water_prod) ** (tau - 1)).sum(axis=1)
        out += (wi * econ.water_inj_cost
                / (1.0 + econ.discount_water_inj) ** (tau - 1)).sum(axis=1)
        return out + sum(econ.drill_cash)
    raise ConfigError(f"objective must be 'wcf' or 'npv', got {objective!r}")
