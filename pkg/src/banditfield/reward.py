"""Mean-field reward families.

Every reward maps a population profile ``f`` (fraction of agents per arm) to a
per-arm reward in ``[0, 1]``. The built-in families only read the played arm's
own fraction ``f(j)``:

- ``general``: ``r(f, j) = 1 / (1 + theta_j * f(j))``
- ``linear``: ``r(f, j) = 1 - theta_j * f(j)``

Custom rewards are plain callables ``fn(f) -> rewards`` (or a dotted import path
to one) and must declare their Lipschitz constant and output range before any
contraction check will accept them.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, fields, replace
from importlib import import_module
from typing import TYPE_CHECKING, Any, Literal

import numpy as np

from banditfield.exceptions import RewardError
from banditfield.log import get_logger


if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray


logger = get_logger(__name__)

type RewardKind = Literal["general", "linear", "custom"]
type RewardFunc = Callable[[NDArray[np.float64]], ArrayLike]

PROFILE_TOLERANCE = 1e-9
THETA_SPREAD = 0.8
"""Per-arm parameters are drawn from ``[THETA_SPREAD * theta, theta]``."""


@dataclass(frozen=True, slots=True)
class RewardSpec:
    """Reward family plus its Lipschitz metadata."""

    kind: RewardKind = "general"
    """Reward family."""

    theta: float = 0.5
    """Base Lipschitz parameter."""

    arm_thetas: tuple[float, ...] | None = None
    """Per-arm parameters, sampled from the run seed when left unset."""

    custom: str | RewardFunc | None = None
    """Callable or dotted import path for ``kind="custom"``."""

    lipschitz: float | None = None
    """Declared ||.||_1 Lipschitz constant of a custom reward."""

    output_range: tuple[float, float] | None = None
    """Declared output range of a custom reward."""

    reads_full_profile: bool = False
    """Whether a custom reward reads more than its own arm's fraction."""

    def __post_init__(self) -> None:
        if self.kind not in ("general", "linear", "custom"):
            msg = f"Unknown reward kind: {self.kind!r}"
            raise RewardError(msg)
        if self.kind == "custom" and self.custom is None:
            msg = "Custom reward requires a callable or import path"
            raise RewardError(msg)
        if self.arm_thetas is not None:
            object.__setattr__(self, "arm_thetas", tuple(float(t) for t in self.arm_thetas))

    @property
    def depends_on(self) -> Literal["own-arm-fraction", "full-profile"]:
        if self.kind == "custom" and self.reads_full_profile:
            return "full-profile"
        return "own-arm-fraction"

    def with_arm_thetas(self, arm_thetas: Sequence[float]) -> RewardSpec:
        return replace(self, arm_thetas=tuple(float(t) for t in arm_thetas))

    def thetas(self, num_arms: int) -> NDArray[np.float64]:
        """Per-arm parameters as an array; uniform ``theta`` when unsampled."""
        if self.arm_thetas is None:
            return np.full(num_arms, float(self.theta))
        if len(self.arm_thetas) != num_arms:
            msg = f"Expected {num_arms} arm thetas, got {len(self.arm_thetas)}"
            raise RewardError(msg)
        return np.asarray(self.arm_thetas, dtype=float)

    def resolve_custom(self) -> RewardFunc:
        """Return the custom reward callable, importing it if given as a path."""
        match self.custom:
            case str() as path:
                try:
                    module_path, attr_name = path.rsplit(".", 1)
                    module = import_module(module_path)
                    fn = getattr(module, attr_name)
                    logger.debug("Loaded custom reward %s", path)
                    return fn  # type: ignore[no-any-return]
                except Exception as e:
                    msg = f"Failed to import reward function from {path}: {e}"
                    raise RewardError(msg) from e
            case None:
                msg = "No custom reward function configured"
                raise RewardError(msg)
            case fn:
                return fn

    def to_dict(self) -> dict[str, Any]:
        if self.custom is not None and not isinstance(self.custom, str):
            msg = "Only custom rewards given as import path can be serialized"
            raise RewardError(msg)
        return {
            "kind": self.kind,
            "theta": self.theta,
            "arm_thetas": list(self.arm_thetas) if self.arm_thetas is not None else None,
            "custom": self.custom,
            "lipschitz": self.lipschitz,
            "output_range": list(self.output_range) if self.output_range else None,
            "reads_full_profile": self.reads_full_profile,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RewardSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            msg = f"Unknown reward_spec keys: {sorted(unknown)}"
            raise RewardError(msg)
        kwargs = dict(data)
        if kwargs.get("arm_thetas") is not None:
            kwargs["arm_thetas"] = tuple(kwargs["arm_thetas"])
        if kwargs.get("output_range") is not None:
            kwargs["output_range"] = tuple(kwargs["output_range"])
        return cls(**kwargs)


def sample_arm_thetas(theta: float, num_arms: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Draw per-arm parameters i.i.d. uniform on ``[0.8 * theta, theta]``."""
    if theta < 0:
        msg = f"theta must be non-negative, got {theta}"
        raise RewardError(msg)
    return rng.uniform(THETA_SPREAD * theta, theta, size=num_arms)


def _check_fraction(f_j: ArrayLike) -> NDArray[np.float64]:
    values = np.asarray(f_j, dtype=float)
    if np.any(values < -PROFILE_TOLERANCE) or np.any(values > 1 + PROFILE_TOLERANCE):
        msg = f"Arm fraction outside [0, 1]: {values}"
        raise RewardError(msg)
    return np.clip(values, 0.0, 1.0)


def general_reward(f_j: ArrayLike, theta_j: ArrayLike) -> Any:
    """Nonlinear decreasing reward ``1 / (1 + theta_j * f_j)``.

    Works elementwise on arrays; scalars in, scalar out.
    """
    f = _check_fraction(f_j)
    result = 1.0 / (1.0 + np.asarray(theta_j, dtype=float) * f)
    return float(result) if result.ndim == 0 else result


def linear_reward(f_j: ArrayLike, theta_j: ArrayLike) -> Any:
    """Linear decreasing reward ``1 - theta_j * f_j``."""
    f = _check_fraction(f_j)
    theta = np.asarray(theta_j, dtype=float)
    if np.any(theta < 0) or np.any(theta > 1):
        msg = f"Linear reward needs theta_j in [0, 1], got {theta}"
        raise RewardError(msg)
    result = 1.0 - theta * f
    return float(result) if result.ndim == 0 else result


def reward_vector(
    spec: RewardSpec,
    profile: ArrayLike,
    arms: ArrayLike | None = None,
) -> NDArray[np.float64]:
    """Evaluate ``r(f, j)`` for all arms, or only for ``arms`` if given.

    Args:
        spec: Reward family and parameters
        profile: Population profile (length-M simplex)
        arms: Optional subset of arm indices to evaluate

    Returns:
        Rewards in the order of ``arms`` (all arms by default)
    """
    f = np.asarray(profile, dtype=float)
    num_arms = f.shape[-1]
    idx = np.arange(num_arms) if arms is None else np.asarray(arms, dtype=int)
    match spec.kind:
        case "general":
            return np.asarray(general_reward(f[..., idx], spec.thetas(num_arms)[idx]))
        case "linear":
            return np.asarray(linear_reward(f[..., idx], spec.thetas(num_arms)[idx]))
        case "custom":
            values = np.asarray(spec.resolve_custom()(f), dtype=float)
            if values.shape != f.shape:
                values = np.broadcast_to(values, f.shape)
            return values[..., idx]
    msg = f"Unknown reward kind: {spec.kind!r}"
    raise RewardError(msg)


def lipschitz_constant(spec: RewardSpec) -> float:
    """Lipschitz constant of the reward in the population profile (||.||_1).

    For both built-in families ``theta`` bounds ``|dr/df_j|``. Custom rewards
    must declare their constant.
    """
    if spec.kind == "custom":
        if spec.lipschitz is None:
            msg = "Custom reward has no declared Lipschitz constant"
            raise RewardError(msg)
        return float(spec.lipschitz)
    return float(spec.theta)


def require_declared(spec: RewardSpec) -> None:
    """Refuse custom rewards without a declared constant and range inside [0, 1]."""
    if spec.kind != "custom":
        return
    lipschitz_constant(spec)
    if spec.output_range is None:
        msg = "Custom reward has no declared output range"
        raise RewardError(msg)
    low, high = spec.output_range
    if low < 0 or high > 1 or low > high:
        msg = f"Custom reward output range {spec.output_range} not within [0, 1]"
        raise RewardError(msg)
