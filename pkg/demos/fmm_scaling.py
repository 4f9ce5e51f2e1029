"""Near-linear scaling of the tree-accelerated evaluation.

Times one Laplace evaluation at several problem sizes and fits the
log-log slope; a slope near 1 confirms O(N) behaviour (a direct sum
would give slope 2).
"""

from fmmbem.study import run_scaling

report = run_scaling([4000, 16000, 64000, 256000], p=5, n_crit=126)

print("      N     time (s)")
for rec in report.records:
    print(f"{rec['N']:7d}    {rec['time']:8.3f}")

print(f"\nfitted log-log slope: {report.derived['slope']:.2f}")
