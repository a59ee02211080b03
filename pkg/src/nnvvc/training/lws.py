"""Epoch-indexed loss weights for the LIC quality-ladder run."""
from dataclasses import dataclass


def psi(x, y):
    """1e-3 * (y**x - 1)."""
    if x < 0:
        raise ValueError(f"psi needs x >= 0, got {x}")
    return 1e-3 * (y ** x - 1.0)


@dataclass(frozen=True)
class LwsSchedule:
    p1: int = 50
    p2: int = 62
    p3: int = 85
    p4: int = 107
    task_base: float = 1.01
    rate_base: float = 1.01
    late_base: float = 1.02
    task_scale: float = 4.0
    rate_scale: float = 2.0
    warmup_rate: float = 0.01
    w_mse: float = 1.0

    def __post_init__(self):
        if not 0 < self.p1 < self.p2 < self.p3 < self.p4:
            raise ValueError(f"need 0 < p1 < p2 < p3 < p4, got {self.p1, self.p2, self.p3, self.p4}")

    @property
    def c(self):
        # plateau value; equals the ramp at its last epoch p3 - 1
        return self.rate_scale * psi(self.p3 - self.p2 - 1, self.rate_base)

    def w_rate(self, n):
        if n < self.p1:
            return self.warmup_rate
        if n < self.p2:
            return 0.0
        if n < self.p3:
            return self.rate_scale * psi(n - self.p2, self.rate_base)
        if n < self.p4:
            return self.c
        return self.c + self.rate_scale * psi(n - self.p4, self.late_base)

    def w_task(self, n):
        if n < self.p1:
            return 0.0
        return self.task_scale * psi(n - self.p1, self.task_base)

    def weights(self, n):
        if n < 0:
            raise ValueError(f"epoch must be >= 0, got {n}")
        return self.w_rate(n), self.w_mse, self.w_task(n)


def lws_weights(n, schedule=None):
    """(w_rate, w_mse, w_task) at epoch ``n``."""
    return (schedule or LwsSchedule()).weights(n)
