##############################################################################
# Estimation Methods
##############################################################################

PERMUTATION = "permutation"

GT_ORIGINAL = "gt_original"

GT_IMPROVED = "gt_improved"

METHODS = (PERMUTATION, GT_ORIGINAL, GT_IMPROVED)

# Names used on the command line for each method.
METHOD_CLI_NAMES = {
    "perm": PERMUTATION,
    "gt": GT_ORIGINAL,
    "gt-improved": GT_IMPROVED,
}

##############################################################################
# Sampling Distribution Variants
##############################################################################

# Sizes 1..N-1 over the N original players.
ORIGINAL = "original"

# Sizes 1..N over the N original players plus the dummy pivot at index N.
AUGMENTED = "augmented"

VARIANTS = (ORIGINAL, AUGMENTED)

##############################################################################
# Game Families
##############################################################################

ADDITIVE = "additive"

THRESHOLD = "threshold"

GLOVE = "glove"

UNANIMITY = "unanimity"

RANDOM_BOUNDED = "random_bounded"

GAME_FAMILIES = (ADDITIVE, THRESHOLD, GLOVE, UNANIMITY, RANDOM_BOUNDED)

# A materialized 2^N utility table is only built up to this many players.
TABLE_MAX_PLAYERS = 20

##############################################################################
# Oracle Limits
##############################################################################

# N! enumeration in exact_shapley_by_permutations.
PERMUTATION_ORACLE_MAX_PLAYERS = 9

# Enumeration of every (k, S) pair of the sampling space.
STATISTIC_ORACLE_MAX_PLAYERS = 14

# Exhaustive utility validation (range and determinism) below this size.
EXHAUSTIVE_VALIDATION_MAX_PLAYERS = 12

##############################################################################
# Sampling and Solving
##############################################################################

# Rows of a SampleBatch drawn from one derived generator stream.
SAMPLE_BLOCK_SIZE = 4096

# Coalitions of an augmented game hold the dummy pivot in one slot past the player limit.
DUMMY_PIVOT_SLOTS = 1

# Largest N for which an infeasible closed-form point triggers the minimax LP.
FEASIBILITY_LP_MAX_PLAYERS = 128

# Below this argument bennett_h switches to its Taylor series.
BENNETT_SERIES_CUTOFF = 1e-4

##############################################################################
# Output Formats
##############################################################################

# Significant digits for every real written to a CSV.
CSV_SIGNIFICANT_DIGITS = 15

# Significant digits for cached utilities (round-trips a float64 exactly).
CACHE_SIGNIFICANT_DIGITS = 17

CACHE_HEADER = "coalition_hex,utility"

EXACT_HEADER = ("player", "phi")

ESTIMATE_HEADER = ("player", "phi_hat")

BOUND_HEADER = ("variant", "n", "epsilon", "delta", "T", "utility_evals", "Z", "q_tot")

TRIAL_HEADER = (
    "method", "trial_index", "T", "l2_error", "linf_error", "utility_evals", "residual", "seed"
)

COVERAGE_SUMMARY_HEADER = ("method", "T", "n_trials", "covered", "coverage", "target")

BENCH_HEADER = ("method", "T", "utility_evals", "mean_l2", "std_l2")

DIAGNOSE_HEADER = ("n", "variant", "Z", "q_tot", "effective_fraction", "two_over_Z")
