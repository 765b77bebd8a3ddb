"""Exception hierarchy.

Every domain error carries the name of the invariant it reports so the CLI can
emit a machine-readable error object.
"""


class SuperhedgingError(Exception):
    invariant = "domain"

    def __init__(self, message: str = "", invariant: str | None = None):
        super().__init__(message)
        if invariant is not None:
            self.invariant = invariant


# ratgeom
class DimensionTooLarge(SuperhedgingError):
    invariant = "dd_convert.pre: d <= 6"


class EmptyInput(SuperhedgingError):
    invariant = "VRep: at least one vertex"


class DimensionMismatch(SuperhedgingError):
    invariant = "equal dimension"


class InvalidRepresentation(SuperhedgingError):
    invariant = "HRep/VRep type invariants"


# solvency
class InvalidCostMatrix(SuperhedgingError):
    invariant = "ExchangeMatrix: mu in [0,1), zero diagonal, triangle inequality"


class DegenerateCone(SuperhedgingError):
    invariant = "ExchangeMatrix: round-trip positivity mu^1j + mu^j1 > 0"


class Infeasible(SuperhedgingError):
    invariant = "LP feasibility"


class NonpositivePrice(SuperhedgingError):
    invariant = "price vector strictly positive"


class PreconditionViolated(SuperhedgingError):
    invariant = "|y - y'| <= eps1"


# market
class InvalidModel(SuperhedgingError):
    invariant = "MarketModel: s0^1 = 1, sigma row 1 = 0, bounded coefficients"


class BudgetExceeded(SuperhedgingError):
    invariant = "node budget"


class UnsupportedDimension(BudgetExceeded):
    invariant = "d <= 3 for exact set computations"


class InvalidClaim(SuperhedgingError):
    invariant = "Claim: L >= 1, strike > 0, 2 <= i <= d"


# portfolio
class NotInCone(SuperhedgingError):
    invariant = "StrategyK: k in K(Pi)"


class GridMismatch(SuperhedgingError):
    invariant = "strategy defined on the path grid"


# pricing
class InconsistentZ(SuperhedgingError):
    invariant = "ConsistentPriceProcess: martingale, Z in dual cone minus zero"


# superhedge
class EmptySet(SuperhedgingError):
    invariant = "SuperhedgeResult: SHP nonempty"


class LevelOutOfRange(SuperhedgingError):
    invariant = "dpp_check.pre: 0 < u < P"


class BadEvent(SuperhedgingError):
    invariant = "concentration_check.pre: P(A) <= eps"


# cli
class ConfigError(SuperhedgingError):
    invariant = "RunConfig: known keys, valid sub-invariants"
