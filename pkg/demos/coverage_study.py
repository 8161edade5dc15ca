"""
A small coverage study
======================

Repeat the evaluation over several simulated worlds and test sets, and record
how often each interval covers the true error. The full desk-scale study is
``StudyConfig(n_dgp_draws=20, n_reps=50)``; this one is smaller so it runs
in under a minute.
"""

from cate_judge import StudyConfig, run_study

config = StudyConfig("A", n_dgp_draws=5, n_reps=20, nuisance_option="TrueNuisance")
table = run_study(config)

print(f"{'method':10s} {'target':10s} {'coverage':>8s} {'width':>7s} {'select':>7s}")
for row in table.rows:
    print(f"{row.method:10s} {row.target:10s} {row.coverage:8.3f} {row.mean_width:7.3f} "
          f"{row.selection_accuracy:7.3f}")
