from typing import Optional

from gazeauth.core.base import CurveModel, OcularTask
from gazeauth.core.errors import ConfigError
from gazeauth.core.evaluation.curves import LinearCurve, LogCurve, PowerCurve, SqrtCurve
from gazeauth.core.models import TaskSpec
from gazeauth.core.synth.tasks import RandomSaccadeTask, SmoothPursuitTask


# ---------- Curve Factory ----------
class CurveModelFactory:
    @staticmethod
    def build(family: str, tail: Optional[int] = None) -> CurveModel:
        if family == "sqrt":
            return SqrtCurve()
        if family == "power":
            return PowerCurve()
        if family == "log":
            return LogCurve()
        if family == "linear":
            return LinearCurve(tail)
        raise ConfigError(f"Unsupported curve family {family}")


# ---------- Task Factory ----------
class TaskFactory:
    @staticmethod
    def build(spec: TaskSpec) -> OcularTask:
        if spec.kind == "random_saccade":
            return RandomSaccadeTask(spec)
        if spec.kind == "smooth_pursuit":
            return SmoothPursuitTask(spec)
        raise ConfigError(f"Unsupported task kind {spec.kind}")
