from shapley_estimation.util.problem_detail import ProblemDetail as pd


INVALID_PARAMETER = pd(
    "urn:shapley-estimation:problem/invalid-parameter",
    2,
    "Invalid parameter",
)

GAME_FILE_NOT_FOUND = pd(
    "urn:shapley-estimation:problem/game-file-not-found",
    3,
    "Game definition file not found",
)

INVALID_DEFINITION_FILE = pd(
    "urn:shapley-estimation:problem/invalid-definition-file",
    4,
    "Invalid definition file",
)

UTILITY_CONTRACT_VIOLATION = pd(
    "urn:shapley-estimation:problem/utility-contract-violation",
    5,
    "Utility function broke its contract",
    "Utilities must be deterministic and lie in [0, 1].",
)

SIZE_LIMIT_EXCEEDED = pd(
    "urn:shapley-estimation:problem/size-limit-exceeded",
    6,
    "Game too large for this operation",
)

COVERAGE_CHECK_FAILED = pd(
    "urn:shapley-estimation:problem/coverage-check-failed",
    7,
    "Empirical coverage below the guaranteed level",
)
