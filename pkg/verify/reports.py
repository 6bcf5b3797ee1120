"""
Artifacts of the `verify` command: verify.csv, hausdorff.csv and a
PASS/FAIL summary in verify.txt.
"""

import logging

from verify.convergence import check_hausdorff_convergence, check_weak_convergence, named_function

logger = logging.getLogger(__name__)

VERIFY_HEADER = [
    'delta', 'function', 'hausdorff', 'bound', 'resolution',
    'value', 'reference', 'stderr', 'gap', 'tolerance',
]
HAUSDORFF_HEADER = ['delta', 'class', 'size', 'hausdorff', 'containment', 'bound', 'resolution', 'holds']


def cell(value) -> str:
    return '' if value is None else repr(float(value))


def run_verify(cfg, ctx):
    options = cfg.options
    maps = cfg.maps
    probabilities = cfg.probabilities or [1.0 / len(maps)] * len(maps)
    deltas = sorted((float(v) for v in options['deltas']), reverse=True)
    verdicts = []

    hausdorff_by_delta = {}
    if 'hausdorff' in options['checks']:
        report = check_hausdorff_convergence(
            maps, probabilities, deltas, cfg.grid.norm, options.get('depth'), cfg.n_jobs
        )
        for row in report.rows:
            worst = hausdorff_by_delta.get(row.delta)
            if worst is None or row.distance > worst.distance:
                hausdorff_by_delta[row.delta] = row
        ctx.write_csv('hausdorff.csv', HAUSDORFF_HEADER, [
            [repr(r.delta), r.class_index, r.class_size, repr(r.distance), repr(r.containment),
             repr(r.bound), repr(r.resolution), int(r.holds)]
            for r in report.rows
        ])
        verdicts.append((f"hausdorff bound ({len(report.rows)} classes)", report.holds))
        verdicts.append(("hausdorff distance shrinks with delta (steps within 2 * resolution)", report.monotone))

    weak_rows = {}
    if 'weak' in options['checks']:
        for name in options['functions']:
            weak = check_weak_convergence(
                maps, probabilities, named_function(name), deltas,
                steps=options.get('elton_steps'), seed=cfg.seed, n_jobs=cfg.n_jobs,
            )
            for row in weak.rows:
                weak_rows[(row.delta, name)] = (row, weak.reference)
            verdicts.append((f"weak convergence of {name}", weak.holds))
            if len(weak.achievable) < len(weak.rows):
                ctx.note(f"{name}: stationary solves achievable for delta in {weak.achievable}")

    names = options['functions'] if 'weak' in options['checks'] else ['']
    rows = []
    for delta in deltas:
        h = hausdorff_by_delta.get(delta)
        for name in names:
            row, reference = weak_rows.get((delta, name), (None, None))
            rows.append([
                repr(delta), name,
                cell(h.distance if h else None), cell(h.bound if h else None), cell(h.resolution if h else None),
                cell(row.value if row else None), cell(reference.mean if reference else None),
                cell(reference.stderr if reference else None),
                cell(row.gap if row else None), cell(row.tolerance if row else None),
            ])
    ctx.write_csv('verify.csv', VERIFY_HEADER, rows)

    passed = all(ok for _, ok in verdicts)
    lines = [f"{'PASS' if ok else 'FAIL'} {label}" for label, ok in verdicts]
    lines.append(f"{'PASS' if passed else 'FAIL'}: {sum(ok for _, ok in verdicts)}/{len(verdicts)} checks")
    ctx.write_text('verify.txt', '\n'.join(lines) + '\n')
    ctx.note(lines[-1])
    logger.info(f"Verification {'passed' if passed else 'failed'} over {len(deltas)} deltas")
