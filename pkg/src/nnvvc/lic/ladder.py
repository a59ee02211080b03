"""Quality ladder: one LIC model per nominal QP and the QP look-up."""
import os

from .model import LicModel

NOMINAL_QPS = (22, 27, 32, 37, 42, 47)


class LadderError(ValueError):
    pass


def select_qp(target_qp, available):
    """Closest nominal QP to ``target_qp``; ties go to the lower QP."""
    available = sorted(available)
    if not available:
        raise LadderError("empty ladder")
    return min(available, key=lambda q: (abs(q - target_qp), q))


class QualityLadder:
    def __init__(self, models):
        self.models = {}
        for m in models:
            if m.nominal_qp is None:
                raise LadderError("ladder models need a nominal QP tag")
            if m.nominal_qp in self.models:
                raise LadderError(f"duplicate nominal QP {m.nominal_qp}")
            self.models[int(m.nominal_qp)] = m
        if not self.models:
            raise LadderError("empty ladder")

    @property
    def qps(self):
        return sorted(self.models)

    def __getitem__(self, qp):
        try:
            return self.models[qp]
        except KeyError:
            raise LadderError(f"no LIC model with id {qp}") from None

    def __iter__(self):
        return iter(self.models[q] for q in self.qps)

    def __len__(self):
        return len(self.models)

    def select(self, target_qp):
        return self.models[select_qp(target_qp, self.models)]

    def check_monotone(self):
        """Measured bpp must strictly decrease as the nominal QP grows."""
        rates = [(q, self.models[q].bpp) for q in self.qps]
        if any(r is None for _, r in rates):
            raise LadderError("ladder models carry no measured bpp")
        for (qa, ra), (qb, rb) in zip(rates, rates[1:]):
            if not rb < ra:
                raise LadderError(f"ladder not monotone: QP {qa} -> {ra:.4f} bpp, QP {qb} -> {rb:.4f} bpp")
        return True

    def save(self, directory):
        for q in self.qps:
            self.models[q].save(os.path.join(directory, f"qp{q:02d}"))

    @classmethod
    def load(cls, directory):
        if not os.path.isdir(directory):
            raise LadderError(f"no ladder at {directory}")
        names = sorted(d for d in os.listdir(directory) if d.startswith("qp"))
        return cls([LicModel.load(os.path.join(directory, d)) for d in names])


def select_model(target_intra_qp, ladder):
    return ladder.select(target_intra_qp)
