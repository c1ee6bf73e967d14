"""Custom Prometheus metrics for smectic-gsav."""
from prometheus_client import Counter, Gauge, Histogram

# --- Time stepping ---
smectic_steps_total = Counter(
    "smectic_steps_total",
    "Time steps completed",
    ["scheme"],
)
smectic_step_duration_seconds = Histogram(
    "smectic_step_duration_seconds",
    "Wall-clock duration of one time step",
)
smectic_relaxation_total = Counter(
    "smectic_relaxation_total",
    "Relaxation branch taken by the auxiliary variable update",
    ["branch"],
)
smectic_divergence_total = Counter(
    "smectic_divergence_total",
    "Runs aborted because the solution stopped being finite",
)

# --- Structure preservation ---
smectic_modified_energy = Gauge(
    "smectic_modified_energy",
    "Modified discrete energy after the latest step",
)
smectic_max_frobenius_q = Gauge(
    "smectic_max_frobenius_q",
    "Max over nodes of |Q|_F after the latest step",
)

# --- Commands ---
smectic_runs_total = Counter(
    "smectic_runs_total",
    "CLI command invocations",
    ["command", "status"],
)
smectic_convergence_runs_total = Counter(
    "smectic_convergence_runs_total",
    "Individual simulations executed by convergence studies",
)
smectic_check_results_total = Counter(
    "smectic_check_results_total",
    "Invariant checks evaluated",
    ["status"],
)

# --- Reference integrator ---
smectic_reference_restarts_total = Counter(
    "smectic_reference_restarts_total",
    "Explicit reference restarts after halving the micro step",
)
