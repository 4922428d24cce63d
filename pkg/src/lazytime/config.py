"""
Configuration constants for lazytime.
"""

# Modeled prefix length of every array
DEFAULT_ARRAY_BOUND = 8

# Event budget for eager execution and trace construction
DEFAULT_FUEL = 10_000

# Environment variable overriding DEFAULT_FUEL (command-line flag wins)
FUEL_ENV_VAR = "LAZYTIME_FUEL"

# Loop iterations allowed per unit of fuel (loops whose bodies assign nothing still stop)
LOOP_STEP_FACTOR = 4

# Fraction of a truncated trace inspected for rewrites of demanded locations
DEFAULT_STABILITY_WINDOW = 0.25

# Refinement checking
DEFAULT_SCALAR_VALUES = (0, 1, 2, 3, 4, 5)
DEFAULT_TIME_SAMPLES = (0, 1, 5, None)  # None stands for infinity
DEFAULT_SAMPLES = 10_000
DEFAULT_SEED = 0
DEFAULT_ENUMERATION_CAP = 200_000

# Extra finite offsets tried for intermediate times when composing by enumeration
TIME_HORIZON = 4

# Factorial-consistent array stores use multipliers drawn from this range
STORE_MULTIPLIERS = (1, 2, 3)

# Source file suffixes
PROGRAM_SUFFIX = ".imp"
SPEC_SUFFIX = ".spec"

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_DISAGREE = 2
EXIT_FUEL_EXCEEDED = 3
EXIT_REFINEMENT_FAILED = 4

# Visualization
NEEDED_EVENT_COLOR = "tab:red"
SKIPPED_EVENT_COLOR = "lightgray"
FRONTIER_COLOR = "tab:blue"
POINT_MARKER_SIZE = 6
