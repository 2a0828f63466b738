import json
import logging
import secrets
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import click

from linglam.builder import Builder
from linglam.entities import (
    ClusterContext,
    Command,
    GenConfig,
    KernelWidthRule,
    NoiseSpec,
    PValueMethod,
    RunConfig,
    TestConfig,
)
from linglam.errors import (
    DataFormatError,
    InvalidConfiguration,
    ModelError,
    NumericalFailure,
)
from linglam.evaluation import Benchmark
from linglam.gin import gin_test
from linglam.helpers import default_threads, parse_csv_list
from linglam.io import (
    gin_result_to_dict,
    load_csv,
    load_graph,
    provenance,
    result_to_dict,
    result_to_dot,
    write_benchmark,
    write_csv,
    write_graph,
    write_json,
)
from linglam.logging import RunContextStreamHandler
from linglam.oracle import exact_gin, graphical_gin
from linglam.synthesis import sample, scenario_graph

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _test_options(command: Callable) -> Callable:
    options = [
        click.option("--alpha", type=float, default=0.05, show_default=True, help="Significance level"),
        click.option(
            "--kernel",
            default=KernelWidthRule.EMPIRICAL.value,
            show_default=True,
            help="Kernel width: 'empirical' for a sample-size rule, 'median' for the median heuristic "
            "or a positive number of standard deviations",
        ),
        click.option(
            "--pvalue",
            type=click.Choice([m.value for m in PValueMethod]),
            default=PValueMethod.GAMMA.value,
            show_default=True,
            help="How HSIC p-values are obtained",
        ),
        click.option(
            "--permutations", type=int, default=500, show_default=True, help="Permutations per HSIC test"
        ),
        click.option(
            "--svd-tolerance", type=float, default=1e-8, show_default=True, help="Relative null-space tolerance"
        ),
        click.option(
            "--hsic-max-samples",
            type=int,
            default=2000,
            show_default=True,
            help="HSIC uses at most this many leading rows; 0 uses all rows",
        ),
        click.option("--joint-hsic", is_flag=True, default=False, help="Test the surrogate against Z jointly"),
        click.option(
            "--cluster-context",
            type=click.Choice([c.value for c in ClusterContext]),
            default=ClusterContext.FULL.value,
            show_default=True,
            help="Z used when testing candidate clusters",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _test_config(seed: int, **kwargs: Any) -> TestConfig:
    kernel = kwargs["kernel"]
    width: Optional[float] = None
    rule = KernelWidthRule.EMPIRICAL
    if kernel in {r.value for r in KernelWidthRule}:
        rule = KernelWidthRule(kernel)
    else:
        try:
            width = float(kernel)
        except ValueError:
            raise click.BadParameter(
                f"expected 'empirical', 'median' or a number, got {kernel!r}", param_hint="--kernel"
            )
    max_samples = kwargs["hsic_max_samples"]
    return TestConfig(
        alpha=kwargs["alpha"],
        kernel_width=width,
        width_rule=rule,
        pvalue_method=PValueMethod(kwargs["pvalue"]),
        permutations=kwargs["permutations"],
        svd_tolerance=kwargs["svd_tolerance"],
        hsic_max_samples=max_samples or None,
        joint_hsic=kwargs["joint_hsic"],
        cluster_context=ClusterContext(kwargs["cluster_context"]),
        seed=seed,
    )


def _resolve_seed(ctx: click.Context, seed: Optional[int]) -> int:
    if seed is None:
        seed = secrets.randbits(64)
        logger.info("no --seed given, drew %d from system entropy", seed)
    handler: Optional[RunContextStreamHandler] = ctx.obj.get("handler")
    if handler is not None:
        handler.set_seed(seed)
    return seed


def _run_config(ctx: click.Context, command: Command, **kwargs: Any) -> RunConfig:
    return RunConfig(
        command=command,
        loglevel=ctx.obj["loglevel"],
        threads=ctx.obj["threads"],
        **kwargs,
    )


def _emit(doc: Dict[str, Any], out: Optional[str]):
    if out is None:
        click.echo(json.dumps(doc, indent=2))
    else:
        write_json(doc, out)


@click.group()
@click.option(
    "--loglevel",
    type=click.Choice(["DEBUG", "INFO", "WARN", "WARNING", "ERROR", "FATAL", "CRITICAL"]),
    default="INFO",
    help="Log level",
)
@click.option(
    "--threads",
    envvar="GIN_THREADS",
    type=click.IntRange(min=1),
    default=None,
    help="Worker threads for GIN test fan-out. Alternatively, environment variable GIN_THREADS "
    "may be used. Defaults to the number of CPUs",
)
@click.pass_context
def cli(ctx: click.Context, loglevel: str, threads: Optional[int]):
    """Estimate linear non-Gaussian latent variable models with GIN tests."""
    handler = RunContextStreamHandler(sys.stderr, command=ctx.invoked_subcommand or "")
    logging.basicConfig(level=getattr(logging, loglevel), handlers=[handler], force=True)
    ctx.ensure_object(dict)
    ctx.obj.update(loglevel=loglevel, threads=threads or default_threads(), handler=handler)


@cli.command()
@click.option("--case", "scenario", default="4", show_default=True, help="Case 1-4 or random:<latents>x<children>")
@click.option("--n", "sample_size", type=int, default=1000, show_default=True, help="Number of samples")
@click.option("--seed", type=int, default=None, help="Master seed; drawn from system entropy if omitted")
@click.option("--repetition", type=int, default=0, show_default=True, help="Repetition index of the random streams")
@click.option("--noise-exponent", type=float, default=5.0, show_default=True, help="Exponent p of sign(u)|u|^p noise")
@click.option("--rescale-noise", is_flag=True, default=False, help="Rescale noise to unit variance")
@click.option("--out", required=True, type=click.Path(dir_okay=False, writable=True), help="CSV output")
@click.option(
    "--graph-out",
    default=None,
    type=click.Path(dir_okay=False, writable=True),
    help="Sidecar JSON with graph and provenance; defaults to <out>.json",
)
@click.pass_context
def simulate(
    ctx: click.Context,
    scenario: str,
    sample_size: int,
    seed: Optional[int],
    repetition: int,
    noise_exponent: float,
    rescale_noise: bool,
    out: str,
    graph_out: Optional[str],
):
    """Generate a benchmark graph and sample data from it."""
    seed = _resolve_seed(ctx, seed)
    gen_config = GenConfig(
        seed=seed,
        sample_size=sample_size,
        repetition=repetition,
        noise=NoiseSpec.uniform_power(noise_exponent),
        rescale_noise=rescale_noise,
    )
    graph = scenario_graph(scenario, gen_config)
    data = sample(graph, gen_config)
    write_csv(data, out)
    run_config = _run_config(ctx, Command.SIMULATE, output_path=out, gen_config=gen_config)
    write_graph(graph, graph_out or f"{out}.json", extra={**provenance(run_config, seed), "scenario": scenario})
    logger.info("wrote %d×%d samples to %s", data.n_samples, data.width, out)


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV input")
@_test_options
@click.option("--seed", type=int, default=None, help="Seed for permutation tests")
@click.option("--out", required=True, type=click.Path(dir_okay=False, writable=True), help="JSON result")
@click.option("--dot", default=None, type=click.Path(dir_okay=False, writable=True), help="DOT rendering of the result")
@click.option("--trace", is_flag=True, default=False, help="Record every GIN test in the result")
@click.pass_context
def discover(
    ctx: click.Context,
    data_path: str,
    seed: Optional[int],
    out: str,
    dot: Optional[str],
    trace: bool,
    **test_kwargs: Any,
):
    """Find causal clusters and the causal order of their latent sets."""
    seed = _resolve_seed(ctx, seed)
    config = _test_config(seed, **test_kwargs)
    data = load_csv(data_path)
    result = (
        Builder()
        .with_sample_data(data)
        .with_test_config(config)
        .with_threads(ctx.obj["threads"])
        .with_trace(trace)
        .build()
        .run()
    )
    run_config = _run_config(ctx, Command.DISCOVER, input_path=data_path, output_path=out, test_config=config)
    write_json({**provenance(run_config, seed), **result_to_dict(result)}, out)
    if dot is not None:
        with open(dot, "w") as f:
            f.write(result_to_dot(result))


@cli.command(name="gin-test")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV input")
@click.option("--z", "z_names", required=True, help="Comma-separated Z columns")
@click.option("--y", "y_names", required=True, help="Comma-separated Y columns")
@_test_options
@click.option("--seed", type=int, default=None, help="Seed for permutation tests")
@click.option(
    "--out", default=None, type=click.Path(dir_okay=False, writable=True), help="JSON output; stdout if omitted"
)
@click.pass_context
def gin_test_command(
    ctx: click.Context,
    data_path: str,
    z_names: str,
    y_names: str,
    seed: Optional[int],
    out: Optional[str],
    **test_kwargs: Any,
):
    """Run a single GIN test of (Z, Y)."""
    seed = _resolve_seed(ctx, seed)
    config = _test_config(seed, **test_kwargs)
    data = load_csv(data_path)
    z = data.indices(parse_csv_list(z_names))
    y = data.indices(parse_csv_list(y_names))
    result = gin_test(data, z, y, config)
    run_config = _run_config(ctx, Command.GIN_TEST, input_path=data_path, output_path=out, test_config=config)
    _emit(
        {
            **provenance(run_config, seed),
            "z": [data.names[c] for c in z],
            "y": [data.names[c] for c in y],
            **gin_result_to_dict(result),
        },
        out,
    )


@cli.command(name="oracle-check")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Graph JSON")
@click.option("--z", "z_names", required=True, help="Comma-separated Z variables")
@click.option("--y", "y_names", required=True, help="Comma-separated Y variables")
@click.option(
    "--out", default=None, type=click.Path(dir_okay=False, writable=True), help="JSON output; stdout if omitted"
)
@click.pass_context
def oracle_check(ctx: click.Context, graph_path: str, z_names: str, y_names: str, out: Optional[str]):
    """Decide GIN of (Z, Y) exactly and by the graphical criterion."""
    graph = load_graph(graph_path)
    z, y = parse_csv_list(z_names), parse_csv_list(y_names)
    exact = exact_gin(graph, z, y)
    graphical = graphical_gin(graph, z, y)
    run_config = _run_config(ctx, Command.ORACLE_CHECK, input_path=graph_path, output_path=out)
    _emit(
        {
            **provenance(run_config, None),
            "z": z,
            "y": y,
            "exact_gin": exact.satisfied,
            "graphical_gin": graphical.satisfied,
            "witness": list(graphical.witness) if graphical.witness is not None else None,
            "certificate": list(exact.certificate),
        },
        out,
    )


@cli.command()
@click.option("--cases", default="1,2,3,4", show_default=True, help="Comma-separated cases or random:<L>x<C> scenarios")
@click.option("--n", "sample_sizes", default="500,1000,2000", show_default=True, help="Comma-separated sample sizes")
@click.option("--reps", type=click.IntRange(min=1), default=10, show_default=True, help="Repetitions per cell")
@click.option("--seed", type=int, default=None, help="Master seed; drawn from system entropy if omitted")
@_test_options
@click.option("--out", required=True, type=click.Path(dir_okay=False, writable=True), help="CSV table")
@click.option(
    "--json",
    "json_out",
    default=None,
    type=click.Path(dir_okay=False, writable=True),
    help="JSON table with provenance; defaults to <out>.json",
)
@click.option("--gnuplot", default=None, type=click.Path(dir_okay=False, writable=True), help="Ordering-rate data file")
@click.pass_context
def benchmark(
    ctx: click.Context,
    cases: str,
    sample_sizes: str,
    reps: int,
    seed: Optional[int],
    out: str,
    json_out: Optional[str],
    gnuplot: Optional[str],
    **test_kwargs: Any,
):
    """Repeat simulate, discover and score over cases and sample sizes."""
    seed = _resolve_seed(ctx, seed)
    scenarios = parse_csv_list(cases)
    try:
        sizes = [int(n) for n in parse_csv_list(sample_sizes)]
    except ValueError:
        raise click.BadParameter(f"expected integers, got {sample_sizes!r}", param_hint="--n")
    test_config = _test_config(seed, **test_kwargs)
    gen_config = GenConfig(seed=seed)

    def report_progress(fraction: float):
        logger.info("benchmark progress: %.0f%%", 100 * fraction)

    rows = Benchmark(test_config, gen_config, ctx.obj["threads"]).run(
        scenarios, sizes, reps, progress_callback=report_progress
    )
    run_config = _run_config(
        ctx, Command.BENCHMARK, output_path=out, test_config=test_config, gen_config=gen_config
    )
    write_benchmark(
        rows,
        out,
        json_path=json_out or f"{out}.json",
        gnuplot_path=gnuplot,
        extra={**provenance(run_config, seed), "matching": "max-jaccard"},
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and map failures to exit codes:
    1 for usage errors, 2 for data or model errors, 3 for numerical failures."""
    args: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        rv = cli.main(args=args, prog_name="linglam", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except InvalidConfiguration as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_USAGE
    except (DataFormatError, ModelError) as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_DATA
    except NumericalFailure as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_NUMERICAL
    return rv if isinstance(rv, int) else EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
