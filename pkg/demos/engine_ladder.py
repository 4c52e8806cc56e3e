"""The batch-detection optimization ladder.

Times the four engine stages on one synthetic problem and prints the ladder:

  baseline  one dictionary pass per input, no blocking
  grouped   inputs processed in tiles (worker-friendly units, same math)
  tiled     cache-blocked distance computation per (dictionary, input) tile
  balanced  hoisted norms + chunked GEMM cross terms inside each tile

All stages must produce the same values — the harness checks every stage
against the baseline within 1e-9 relative and shares the reference checksum
only on a match, so a speedup can never come from a wrong answer.

Run:  python demos/engine_ladder.py      (roughly half a minute)
"""

from kapsm import bench_detection, report_to_csv

report = bench_detection(
    dict_sizes=[4000],
    batch_sizes=[2048],
    stages=("baseline", "grouped", "tiled", "balanced"),
    workers=(1,),
    repeats=5,
    seed=0,
    antennas=16,
)

print(f"{'stage':>9} {'median':>9} {'p95':>9} {'evals/s':>12} {'ok':>4}")
for row in report.rows:
    print(
        f"{row.stage:>9} {row.median_us / 1e3:>8.1f}ms {row.p95_us / 1e3:>8.1f}ms "
        f"{row.throughput_evals_per_s:>12.0f} {str(row.ok):>4}"
    )

base = report.rows[0].median_us
best = min(row.median_us for row in report.rows)
checksums = {row.checksum for row in report.rows}
print(f"\nspeedup over baseline: {base / best:.1f}x")
print(f"all stages share the reference checksum: {len(checksums) == 1}")
print("\nCSV report (what `kapsm bench` emits):\n")
print(report_to_csv(report))
