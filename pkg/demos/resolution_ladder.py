"""Print the error-versus-grid ladder for the three study scenarios.

Same study the convergence subcommand runs: a sharp analytic profile
pushed through charts, factorization, and transport at three grids,
once with trig interpolation (spectral decay), once with cubic
(fourth order), and once on band-limited data (floor from the start).
"""

from fibkit import RunConfig, run_study
from fibkit.convergence import format_table


def main() -> None:
    study = run_study(RunConfig())
    for table in study.tables:
        print(format_table(table))
        print()
    print(f"cubic log-log slope: {study.cubic_slope:.2f} (target -4)")
    for check in study.checks:
        word = "ok" if check.passed else "FAILED"
        print(f"{check.name}: {check.residual:.2e}  {word}")


if __name__ == "__main__":
    main()
