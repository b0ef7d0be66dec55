"""
Command-line front end.

Every subcommand reads a JSON space file, runs the corresponding analysis and
writes ``<command>.json`` (plus CSV tables where they make sense) into the
output directory. A short table is printed to stdout; ``--json`` prints the
JSON document instead.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from app import TOOL_VERSION, configure_logging, get_settings
from dynamics import (DynamicsQuery, classify, gethner_shapiro_witness, orbit, periodic_vector,
                      unconditional_series_check)
from errors import DomainError, ParseError, TridiagError, UncertifiedError
from matrixkernel import (diagonalization_check, direct_sum_classify, direct_sum_kernel_check,
                          mk_kernel_eval, unitarity_deviation)
from models import record_run
from sequences import asymptotics
from shift_operator import boundedness_report, build_matrix, compactness_check, decompose
from space import kernel_deriv_norm, norm_estimates
from space_config import load_space_config
from spectrum import essential_spectrum, hc_subspace_check
from verify import ORACLES, run_all

logger = logging.getLogger(__name__)

DEFAULT_OUT = "./tridiag-out"
SWEEP_MAX_POINTS = 10000
# fixed sample points for the direct-sum kernel check of `vector`
KERNEL_SAMPLE_RADII = (0.1, 0.35, 0.6, 0.85)
KERNEL_SAMPLE_ANGLES = 8


def json_ready(value):
    """Recursively convert numpy and complex values; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [json_ready(float(value.real)), json_ready(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        if math.isnan(value):
            return "nan"
        return "inf" if value > 0 else "-inf"
    return value


def dumps(document):
    return json.dumps(json_ready(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def _csv_cell(value):
    if isinstance(value, (complex, np.complexfloating)):
        return f'{float(value.real)!r},{float(value.imag)!r}'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_atomic(path, text):
    """Write text to path through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temp_path, path)
    except OSError:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise


def parse_lambda(text):
    """'RE,IM' or 'RE'"""
    parts = [p.strip() for p in str(text).split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ParseError(f"--lambda: expected RE or RE,IM, got {text!r}")


def parse_complex_list(text, flag):
    """Comma-separated entries, each a Python complex literal such as 1, -0.5 or 0.2+0.1j."""
    try:
        values = [complex(token.strip().replace(" ", "")) for token in str(text).split(",") if token.strip()]
    except ValueError:
        raise ParseError(f"{flag}: cannot parse {text!r} as a list of numbers")
    if not values:
        raise ParseError(f"{flag}: at least one entry is required")
    return values


def parse_point(text, flag):
    values = parse_complex_list(text, flag)
    if len(values) == 2 and all(v.imag == 0 for v in values):
        return complex(values[0].real, values[1].real)
    if len(values) != 1:
        raise ParseError(f"{flag}: expected one complex number or RE,IM, got {text!r}")
    return values[0]


def parse_sweep(text):
    """START:STOP:STEP, inclusive of STOP when it lies on the grid."""
    try:
        start, stop, step = (float(p) for p in str(text).split(":"))
    except ValueError:
        raise ParseError(f"--sweep: expected START:STOP:STEP, got {text!r}")
    if step <= 0 or stop < start:
        raise DomainError(f"--sweep: need STEP > 0 and STOP >= START, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count > SWEEP_MAX_POINTS:
        raise DomainError(f"--sweep: {count} points exceed {SWEEP_MAX_POINTS}")
    return [start + i * step for i in range(count)]


def print_table(rows):
    width = max((len(key) for key, _ in rows), default=0)
    for key, value in rows:
        print(f'{key.ljust(width)}  {value}')


def cmd_describe(args, config):
    horizon = args.horizon or config.options.horizon
    if config.is_matrix:
        mspace = config.matrix_space
        channels = []
        summary = [('kind', f'matrix, d = {mspace.d}'),
                   ('unitarity deviation', f'{unitarity_deviation(mspace.Q):.3e}')]
        for q, pair in enumerate(mspace.channels):
            report = asymptotics(pair)
            bound = boundedness_report(pair, horizon)
            channels.append({'asymptotics': report.to_dict(), 'boundedness': bound.to_dict()})
            summary.append((f'channel {q}', f'{bound.label()}, limsup = {report.tridiag_limsup.to_json()}'))
        result = {'kind': 'matrix', 'd': mspace.d, 'unitarity_deviation': unitarity_deviation(mspace.Q),
                  'channels': channels}
        if mspace.has_raw_tables:
            diagnostic = diagonalization_check(mspace, tol=config.options.tolerance)
            result['diagonalization'] = diagnostic.to_dict()
            summary.append(('diagonalization', 'passed' if diagnostic.passed else 'FAILED'))
        return result, {}, [], summary

    space = config.space()
    report = asymptotics(config.pair)
    bound = boundedness_report(config.pair, horizon)
    result = {
        'kind': 'scalar',
        'standing_assumption': space.standing_assumption,
        'asymptotics': report.to_dict(),
        'boundedness': bound.to_dict(),
    }
    summary = [
        ('standing assumption', 'holds' if space.standing_assumption else 'fails'),
        ('boundedness', f'{bound.label()}, limsup = {report.tridiag_limsup.to_json()}'),
        ('|rho_a|', f'{report.ratio_limit_a:g}'),
        ('c_n -> 0', str(report.c_limit_zero)),
        ('c_n != 0 for all n', str(report.c_nonvanishing)),
    ]
    return result, {}, [], summary


def _classify_one(args, config, lam):
    if config.is_matrix:
        direct = direct_sum_classify(config.matrix_space, lam)
        return direct.report, direct.to_dict()
    query = DynamicsQuery(lam)
    report = classify(config.pair, query)
    data = report.to_dict()
    if args.steps:
        trace = gethner_shapiro_witness(config.space(), query, args.m, args.steps)
        data['witness'] = trace.to_dict()
    return report, data


def cmd_classify(args, config):
    if args.sweep:
        rows = []
        reports = []
        for value in parse_sweep(args.sweep):
            report, _ = _classify_one(args, config, complex(value, 0.0))
            reports.append(report)
            data = report.to_dict()
            rows.append((report.lambda_abs, data['hypercyclic'], data['mixing'], data['chaotic'],
                         data['hypercyclic_subspace']))
        header = ('lambda_abs', 'hypercyclic', 'mixing', 'chaotic', 'subspace')
        result = {'sweep': [dict(zip(header, row)) for row in rows]}
        summary = [(f'|lambda| = {row[0]:g}', f'hc {row[1]}, mix {row[2]}, chaos {row[3]}') for row in rows]
        return result, {'classify.csv': csv_text(header, rows)}, reports, summary

    lam = parse_lambda(args.lambda_)
    report, data = _classify_one(args, config, lam)
    summary = [
        ('|lambda|', f'{report.lambda_abs:g}'),
        ('boundedness', report.boundedness),
        ('hypercyclic', data['hypercyclic']),
        ('mixing', data['mixing']),
        ('chaotic', data['chaotic']),
        ('hypercyclic subspace', data['hypercyclic_subspace']),
    ]
    return data, {}, [report], summary


def cmd_matrix(args, config):
    matrix = build_matrix(config.space(), args.n)
    header = [f'col{j}' for j in range(matrix.N)]
    tables = {'matrix.csv': csv_text(header, matrix.to_csv_rows())}
    column = ', '.join(f'{v.real:.6g}' for v in matrix.column(0)[:6])
    return matrix.to_dict(), tables, [], [('N', str(matrix.N)), ('column 0', column)]


def cmd_decompose(args, config):
    space = config.space()
    decomposition = decompose(space, args.n, args.bands)
    compactness = compactness_check(space, args.n, tol=args.tol)
    result = decomposition.to_dict()
    result['compactness'] = compactness.to_dict()

    rows = []
    for m, band in enumerate(decomposition.bands, start=1):
        for j, value in enumerate(band):
            rows.append((m, j + m, j, float(value.real), float(value.imag)))
    tables = {'decompose_bands.csv': csv_text(('band', 'row', 'column', 're', 'im'), rows)}
    summary = [
        ('N, M', f'{decomposition.N}, {decomposition.M}'),
        ('residual', f'{decomposition.residual:.3e} (columns >= {decomposition.first_covered_column})'),
        ('largest dropped entry', f'{decomposition.dropped_max:.3e}'),
        ('compactness', compactness.verdict),
        ('decay index', str(compactness.decay_index)),
    ]
    return result, tables, [], summary


def cmd_spectrum(args, config):
    pair = config.space().pair
    annulus = essential_spectrum(pair, n_max=args.horizon, k_max=args.k_max)
    result = annulus.to_dict()
    subspace = hc_subspace_check(pair, parse_lambda(args.lambda_))
    result['hypercyclic_subspace'] = subspace.label()
    tables = {}
    if args.csv:
        rows = [(n + 1, annulus.inner_by_n[n], annulus.outer_by_n[n]) for n in range(annulus.n_max)]
        tables['spectrum.csv'] = csv_text(('n', 'inner', 'outer'), rows)
    summary = [
        ('annulus', f'{annulus.inner_radius:g} <= |z| <= {annulus.outer_radius:g}'),
        ('finite horizon', f'[{annulus.finite_inner:.6g}, {annulus.finite_outer:.6g}] '
                           f'at ({annulus.n_max}, {annulus.k_max})'),
        ('hypercyclic subspace', subspace.label()),
    ]
    return result, tables, [], summary


def cmd_norms(args, config):
    space = config.space()
    estimates = norm_estimates(space, args.n)
    derivs = [kernel_deriv_norm(space, n) for n in range(args.n + 1)]
    result = estimates.to_dict()
    result['kernel_derivative_log_norms'] = [d.log_value for d in derivs]

    lam = parse_lambda(args.lambda_)
    if asymptotics(config.pair).tridiag_less_than_one:
        series = unconditional_series_check(space, DynamicsQuery(lam), args.n)
        result['unconditional_series'] = series.to_dict()

    tables = {}
    if args.csv:
        rows = [(n, estimates.norms[n], derivs[n].log_value) for n in range(args.n + 1)]
        tables['norms.csv'] = csv_text(('n', 'monomial_norm', 'kernel_derivative_log_norm'), rows)
    summary = [
        ('certified', str(estimates.certified)),
        ('M1', str(estimates.m1)),
        ('M2', f'{estimates.m2:g}'),
        ('M2 (tail)', str(estimates.m2_tail)),
        (f'||z^{args.n}||', f'{estimates.norms[-1]:.6g}'),
    ]
    return result, tables, [], summary


def cmd_orbit(args, config):
    space = config.space()
    x = parse_complex_list(args.x, "--x")
    N = args.n or space.truncation
    trace = orbit(space, DynamicsQuery(parse_lambda(args.lambda_)), x, args.steps, N)
    tables = {}
    if args.csv:
        rows = [(k, trace.norms[k], trace.matrix_norms[k]) for k in range(trace.steps + 1)]
        tables['orbit.csv'] = csv_text(('k', 'norm', 'matrix_norm'), rows)
    summary = [
        ('steps', str(trace.steps)),
        ('certified', str(trace.certified)),
        ('final norm', f'{trace.norms[-1]:.6g}'),
    ]
    return trace.to_dict(), tables, [], summary


def cmd_periodic(args, config):
    space = config.space()
    f = parse_complex_list(args.f, "--f")
    result = periodic_vector(space, DynamicsQuery(parse_lambda(args.lambda_)), args.period, f,
                             args.terms, args.n)
    summary = [
        ('period, K', f'{result.period}, {result.K}'),
        ('identity error', f'{result.identity_error:.3e}'),
        ('residual norm', f'{result.residual_norm:.6g}' + ('' if result.residual_certified else ' (uncertified)')),
        ('matrix residual', f'{result.matrix_residual_norm:.6g}'),
        ('experimental', str(result.experimental)),
    ]
    return result.to_dict(), {}, [], summary


def kernel_samples(z, w):
    angles = 2.0 * math.pi * np.arange(KERNEL_SAMPLE_ANGLES) / KERNEL_SAMPLE_ANGLES
    points = [complex(r * math.cos(t), r * math.sin(t)) for r in KERNEL_SAMPLE_RADII for t in angles]
    return [(z, w)] + list(zip(points, reversed(points)))


def cmd_vector(args, config):
    if not config.is_matrix:
        raise ParseError(f"{config.source}: `vector` needs a matrix space file (keys d, Q, channels)")
    mspace = config.matrix_space
    z = parse_point(args.z, "--z")
    w = parse_point(args.w, "--w")
    N = args.n or config.options.truncation
    kernel = mk_kernel_eval(mspace, z, w, N)
    kernel_check = direct_sum_kernel_check(mspace, kernel_samples(z, w), tol=config.options.tolerance, N=N)
    direct = direct_sum_classify(mspace, parse_lambda(args.lambda_))

    result = {
        'z': z,
        'w': w,
        'kernel': kernel,
        'kernel_check': kernel_check.to_dict(),
        'classification': direct.to_dict(),
    }
    summary = [('kernel check', 'passed' if kernel_check.passed else 'FAILED'),
               ('slowest channel', str(direct.slowest_channel))]
    if mspace.has_raw_tables:
        diagnostic = diagonalization_check(mspace, tol=config.options.tolerance)
        result['diagonalization'] = diagnostic.to_dict()
        summary.append(('diagonalization', 'passed' if diagnostic.passed else 'FAILED'))
    data = direct.to_dict()
    summary += [('hypercyclic', data['hypercyclic']), ('mixing', data['mixing']), ('chaotic', data['chaotic'])]
    return result, {}, [direct.report], summary


def cmd_verify(args, config):
    space = config.space()
    which = ORACLES if args.which == "all" else (args.which,)
    if "norms" in which and not asymptotics(config.pair).tridiag_less_than_one:
        if args.strict:
            raise UncertifiedError("monomial norm oracle needs limsup |b_n/a_(n+1)| < 1")
        logger.warning("Skipping the monomial norm oracle: no geometric tail")
        which = tuple(name for name in which if name != "norms")
    reports = run_all(space, N=args.n, n_max=args.norms_n, horizons=((args.horizon, args.k_max),),
                      which=which)
    result = {'oracles': [report.to_dict() for report in reports],
              'passed': all(report.passed for report in reports)}
    summary = [(report.name, f'{"pass" if report.passed else "FAIL"} ({report.deviation:.3e})')
               for report in reports]
    return result, {}, [], summary


COMMANDS = {
    'describe': cmd_describe,
    'classify': cmd_classify,
    'matrix': cmd_matrix,
    'decompose': cmd_decompose,
    'spectrum': cmd_spectrum,
    'norms': cmd_norms,
    'orbit': cmd_orbit,
    'periodic': cmd_periodic,
    'vector': cmd_vector,
    'verify': cmd_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--spec', required=True, help='JSON space file')
    common.add_argument('--lambda', dest='lambda_', default='1', help='scalar multiplier RE or RE,IM')
    common.add_argument('--out', default=None, help=f'output directory (default {DEFAULT_OUT}; TRIDIAG_OUT wins)')
    common.add_argument('--json', action='store_true', help='print the JSON report to stdout')
    common.add_argument('--csv', action='store_true', help='also write optional CSV tables')
    common.add_argument('--db', default=None, help='SQLAlchemy URL of the run ledger (default DATABASE_URL)')
    common.add_argument('--log-level', default=None, help='logging level (default TRIDIAG_LOG_LEVEL)')

    parser = argparse.ArgumentParser(prog='tridiag', description='Backward shift on tridiagonal kernel spaces')
    subparsers = parser.add_subparsers(dest='command', required=True)

    describe = subparsers.add_parser('describe', parents=[common], help='asymptotics and boundedness')
    describe.add_argument('--horizon', type=int, default=None)

    classify_parser = subparsers.add_parser('classify', parents=[common], help='dynamics of lambda B')
    classify_parser.add_argument('--sweep', default=None, help='START:STOP:STEP grid of |lambda|')
    classify_parser.add_argument('--steps', type=int, default=0, help='length of the witness trace')
    classify_parser.add_argument('--m', type=int, default=0, help='monomial offset of the witness trace')

    matrix = subparsers.add_parser('matrix', parents=[common], help='truncated matrix of B')
    matrix.add_argument('--n', type=int, default=16)

    decompose_parser = subparsers.add_parser('decompose', parents=[common], help='weighted shift plus bands')
    decompose_parser.add_argument('--n', type=int, default=64)
    decompose_parser.add_argument('--bands', type=int, default=8)
    decompose_parser.add_argument('--tol', type=float, default=1e-8, help='compactness decay threshold')

    spectrum = subparsers.add_parser('spectrum', parents=[common], help='essential spectrum annulus')
    spectrum.add_argument('--horizon', type=int, default=50, help='largest n of the finite-horizon table')
    spectrum.add_argument('--k-max', type=int, default=2000)

    norms = subparsers.add_parser('norms', parents=[common], help='monomial norms and constants')
    norms.add_argument('--n', type=int, default=100)

    orbit_parser = subparsers.add_parser('orbit', parents=[common], help='orbit norms of a basis vector')
    orbit_parser.add_argument('--x', required=True, help='basis coordinates, comma separated')
    orbit_parser.add_argument('--steps', type=int, default=20)
    orbit_parser.add_argument('--n', type=int, default=None, help='matrix truncation')

    periodic = subparsers.add_parser('periodic', parents=[common], help='approximate periodic vector')
    periodic.add_argument('--period', type=int, required=True)
    periodic.add_argument('--terms', '--k', dest='terms', type=int, default=100)
    periodic.add_argument('--f', default='1', help='power coefficients of the seed polynomial')
    periodic.add_argument('--n', type=int, default=512, help='matrix truncation')

    vector = subparsers.add_parser('vector', parents=[common], help='matrix-valued kernel mode')
    vector.add_argument('--z', default='0.5')
    vector.add_argument('--w', default='0.3')
    vector.add_argument('--n', type=int, default=None, help='kernel truncation')

    verify_parser = subparsers.add_parser('verify', parents=[common], help='independent oracles')
    verify_parser.add_argument('which', nargs='?', default='all', choices=('all',) + ORACLES)
    verify_parser.add_argument('--n', type=int, default=64, help='matrix oracle dimension')
    verify_parser.add_argument('--norms-n', type=int, default=100)
    verify_parser.add_argument('--horizon', type=int, default=50)
    verify_parser.add_argument('--k-max', type=int, default=2000)
    verify_parser.add_argument('--strict', action='store_true', help='fail when an oracle cannot be certified')
    return parser


def run_command(args):
    """Run one parsed command; returns the exit code."""
    settings = get_settings()
    config = load_space_config(args.spec)
    result, tables, reports, summary = COMMANDS[args.command](args, config)

    document = {
        'command': args.command,
        'tool_version': TOOL_VERSION,
        'spec_sha256': config.sha256,
        'options': config.options.to_dict(),
        'result': result,
    }
    text = dumps(document)

    out_dir = settings.out_dir or args.out or DEFAULT_OUT
    os.makedirs(out_dir, exist_ok=True)
    write_atomic(os.path.join(out_dir, f'{args.command}.json'), text)
    for name, content in tables.items():
        write_atomic(os.path.join(out_dir, name), content)
    logger.info(f"Wrote {1 + len(tables)} artifact(s) to {out_dir}")

    exit_code = 0
    if args.command == 'verify' and not result['passed']:
        exit_code = 1

    db_url = args.db or settings.database_url
    if db_url:
        record_run(db_url, args.command, config.sha256, TOOL_VERSION, json.loads(text), reports, exit_code)

    if args.json:
        sys.stdout.write(text)
    else:
        print_table(summary)
    return exit_code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run_command(args)
    except TridiagError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return e.exit_code
    except OSError as e:
        logger.error(f"Error writing artifacts: {str(e)}")
        return 1
