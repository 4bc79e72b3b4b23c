"""Command-line pipeline orchestration.

Subcommands mirror the pipeline stages: plan-tiles, fetch-tiles,
eval-detect, aggregate, join-features, validate, train, explain, ols, ame,
synth, and report. Every subcommand is deterministic given its inputs and
seed; outputs carry no timestamps, so re-runs are byte-identical. Exit
codes: 0 success, 1 validation error (bad inputs, schema violations),
2 runtime error.

Defaults follow the deployment study: zoom 20, 640x640 tiles, NMS cutoffs
0.2 (roof) and 0.1 (PV). A YAML config file (``--config``) can supply any
default; explicit flags win. The tile endpoint credential is only ever
read from an environment variable (default ``TILE_API_KEY``).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
import yaml

from . import deploy, detect, geo, synth
from .explain import (
    LinearModelSpec,
    ame as compute_ame,
    build_fis_table,
    fis_csv_rows,
    ols_fit,
    ols_table_rows,
    ols_table_text,
    parse_terms,
    shap_matrix,
)
from .ingest import joins as ingest_joins
from .ingest.schema import TABLE_SCHEMA, target_names
from .ingest.tilefetch import TileFetchConfig, TileFetcher
from .learn import (
    DEFAULT_GRID,
    GridEntry,
    assemble_datasets,
    load_ensemble,
    run_experiment_grid,
    save_ensemble,
    table1_rows,
    write_grid_csv,
    write_table1_csv,
)
from .learn.data import Dataset, read_dataset_csv, write_dataset_csv

DEFAULTS = {
    "zoom": 20,
    "tile_width": 640,
    "tile_height": 640,
    "nms_roof": 0.2,
    "nms_pv": 0.1,
    "seed": 0,
    "threads": 1,
    "test_fraction": 0.2,
    "rate_per_s": 2.0,
    "endpoint": "https://tiles.invalid/v1?center={lat},{lon}&zoom={zoom}&size={width}x{height}&key={key}",
}


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
            _fail(1, f"{type(exc).__module__}.{type(exc).__name__}: {exc}")
        except click.ClickException:
            raise
        except Exception as exc:
            _fail(2, f"{type(exc).__module__}.{type(exc).__name__}: {exc}")

    return wrapper


def _load_config(path) -> dict:
    if path is None:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    return data


def _setting(cfg: dict, flag, key: str):
    if flag is not None:
        return flag
    return cfg.get(key, DEFAULTS.get(key))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML file supplying defaults for any flag.")
@click.pass_context
def main(ctx, config_path):
    """Rooftop solar deployment measurement and prediction pipeline."""
    ctx.obj = _load_config(config_path)


PLAN_COLUMNS = (
    "geoid", "tile_index", "center_lon", "center_lat", "zoom",
    "width_px", "height_px", "gsd_m_per_px", "west", "south", "east", "north",
)


@main.command("plan-tiles")
@click.option("--blocks", required=True, type=click.Path(exists=True), help="GeoJSON of census units.")
@click.option("--out", required=True, type=click.Path())
@click.option("--zoom", type=int, default=None)
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--keep-unpopulated", is_flag=True, help="Also plan blocks with zero residents.")
@click.pass_context
@handle_errors
def plan_tiles_cmd(ctx, blocks, out, zoom, width, height, keep_unpopulated):
    """Plan the image-tile grid over every (populated) census unit."""
    cfg = ctx.obj
    zoom = int(_setting(cfg, zoom, "zoom"))
    width = int(_setting(cfg, width, "tile_width"))
    height = int(_setting(cfg, height, "tile_height"))
    units = geo.read_block_units(blocks)
    if not keep_unpopulated:
        units = geo.select_populated(units)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLAN_COLUMNS)
        total = 0
        for unit in units:
            plan = geo.plan_tiles(unit, zoom, width, height)
            for i, fp in enumerate(plan.footprints):
                b = geo.footprint_bounds(fp)
                writer.writerow([
                    unit.geoid, i, repr(fp.center.lon), repr(fp.center.lat), fp.zoom,
                    fp.width_px, fp.height_px, repr(fp.gsd_m_per_px),
                    repr(b.west), repr(b.south), repr(b.east), repr(b.north),
                ])
                total += 1
    click.echo(f"planned {total} tiles over {len(units)} units -> {out}")


@main.command("fetch-tiles")
@click.option("--plan", required=True, type=click.Path(exists=True), help="plan-tiles CSV.")
@click.option("--cache-dir", required=True, type=click.Path())
@click.option("--endpoint", default=None, help="URL template with {lon},{lat},{zoom},{width},{height},{key}.")
@click.option("--rate", type=float, default=None, help="Requests per second.")
@click.option("--offline/--online", default=True, help="Offline serves only cached/fixture tiles.")
@click.option("--retries", type=int, default=3)
@click.option("--manifest", type=click.Path(), default=None, help="Where to write the fetch manifest CSV.")
@click.pass_context
@handle_errors
def fetch_tiles_cmd(ctx, plan, cache_dir, endpoint, rate, offline, retries, manifest):
    """Fetch planned tiles through the cached, rate-limited client."""
    cfg = ctx.obj
    fetch_cfg = TileFetchConfig(
        endpoint=str(_setting(cfg, endpoint, "endpoint")),
        cache_dir=Path(cache_dir),
        rate_per_s=float(_setting(cfg, rate, "rate_per_s")),
        max_retries=retries,
        offline=offline,
    )
    fetcher = TileFetcher(fetch_cfg)
    rows = []
    failures = 0
    with open(plan, newline="") as fh:
        for row in csv.DictReader(fh):
            fp = geo.ImageFootprint(
                geo.GeoPoint(float(row["center_lon"]), float(row["center_lat"])),
                int(row["zoom"]), int(row["width_px"]), int(row["height_px"]),
            )
            try:
                payload, record = fetcher.fetch(fp)
                rows.append([row["geoid"], row["tile_index"], record["cache_key"],
                             record["source"], len(payload)])
            except Exception as exc:
                failures += 1
                rows.append([row["geoid"], row["tile_index"], fetcher.cache_key(fp),
                             f"failed: {exc}", 0])
    if manifest:
        with open(manifest, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["geoid", "tile_index", "cache_key", "source", "bytes"])
            writer.writerows(rows)
    click.echo(f"fetched {len(rows) - failures}/{len(rows)} tiles")
    if failures:
        _fail(2, f"{failures} tiles failed to fetch")


@main.command("eval-detect")
@click.option("--detections", required=True, type=click.Path(exists=True))
@click.option("--ground-truth", required=True, type=click.Path(exists=True))
@click.option("--csv", "csv_out", type=click.Path(), default=None)
@click.option("--coco-text", type=click.Path(), default=None,
              help="Write the fixed-width AP/AR text block ('-' for stdout).")
@handle_errors
def eval_detect_cmd(detections, ground_truth, csv_out, coco_text):
    """COCO-style AP/AR report for a detection corpus."""
    dets = detect.read_detections_jsonl(detections)
    gts = detect.read_groundtruth_jsonl(ground_truth)
    report = detect.eval_report(dets, gts)
    if csv_out:
        with open(csv_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "iou", "area", "max_dets", "class", "value"])
            for row in report.csv_rows():
                writer.writerow([row["metric"], row["iou"], row["area"],
                                 row["max_dets"], row["class"], repr(row["value"])])
    text = report.coco_text()
    if coco_text == "-":
        click.echo(text, nl=False)
    elif coco_text:
        Path(coco_text).write_text(text)
    if not coco_text and not csv_out:
        click.echo(text, nl=False)


@main.command("aggregate")
@click.option("--observations", required=True, type=click.Path(exists=True))
@click.option("--households", "households_csv", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--nms-roof", type=float, default=None)
@click.option("--nms-pv", type=float, default=None)
@click.option("--no-nms", is_flag=True, help="Boxes are already suppressed.")
@click.option("--merge-eps", type=float, default=None,
              help="Merge PV boxes whose eps-expanded boundaries intersect into one system.")
@click.pass_context
@handle_errors
def aggregate_cmd(ctx, observations, households_csv, out, nms_roof, nms_pv, no_nms, merge_eps):
    """Roll per-image detections up into block-group deployment measures."""
    cfg = ctx.obj
    thresholds = {
        detect.BoxClass.ROOF: float(_setting(cfg, nms_roof, "nms_roof")),
        detect.BoxClass.PV: float(_setting(cfg, nms_pv, "nms_pv")),
    }
    obs = deploy.read_observations_jsonl(observations, thresholds, apply_nms=not no_nms)
    households = ingest_joins.read_households_csv(households_csv)
    records, issues = deploy.rollup(obs, households, merge_eps)
    deploy.write_deployment_csv(out, records)
    for issue in issues:
        click.echo(f"warning: {issue.block_group_id}: {issue.reason}", err=True)
    click.echo(f"aggregated {len(records)} block groups -> {out}")


def _parse_layer_spec(spec: str):
    name, rest = spec.split("=", 1)
    parts = rest.split(":")
    if len(parts) < 2:
        raise ValueError(f"layer spec {spec!r} must be name=path:id_property")
    return name, parts[0], parts[1]


@main.command("join-features")
@click.option("--block-groups", required=True, type=click.Path(exists=True), help="GeoJSON with geoid.")
@click.option("--out", required=True, type=click.Path())
@click.option("--bg-csv", type=click.Path(exists=True), default=None,
              help="Block-group-level feature values keyed by geoid.")
@click.option("--deploy-csv", type=click.Path(exists=True), default=None,
              help="Deployment CSV supplying the two targets.")
@click.option("--layer", "layers", multiple=True,
              help="Overlay layer as name=path.geojson:id_property (largest-share join).")
@click.option("--zip-layer", default=None,
              help="Zip layer as path.geojson:id_property:population_property.")
@click.option("--tract-csv", type=click.Path(exists=True), default=None,
              help="Tract-level values broadcast onto block groups.")
@click.option("--impute", default="Median Home Value,Year Structure Built",
              help="Comma-separated features to impute from adjacent block groups.")
@handle_errors
def join_features_cmd(block_groups, out, bg_csv, deploy_csv, layers, zip_layer, tract_csv, impute):
    """Assemble the block-group feature table from geospatial layers."""
    units = geo.read_block_units(block_groups)
    # one joining geometry per geoid: the largest part of a multi-part unit
    best: dict[str, geo.BlockUnit] = {}
    for u in units:
        cur = best.get(u.geoid)
        if cur is None or geo.polygon_area_m2(u.geometry) > geo.polygon_area_m2(cur.geometry):
            best[u.geoid] = u
    records = {g: ingest_joins.BlockGroupRecord(g) for g in sorted(best)}

    if bg_csv:
        for rec in ingest_joins.read_features_csv(bg_csv):
            if rec.geoid in records:
                records[rec.geoid].values.update(
                    {k: v for k, v in rec.values.items() if v is not None}
                )
    if deploy_csv:
        count_name, ratio_name = target_names()
        for d in deploy.read_deployment_csv(deploy_csv):
            if d.block_group_id in records:
                records[d.block_group_id].values[count_name] = d.pv_count_per_hh
                if d.pv_to_roof_ratio is not None:
                    records[d.block_group_id].values[ratio_name] = d.pv_to_roof_ratio

    for spec in layers:
        name, path, id_prop = _parse_layer_spec(spec)
        layer = ingest_joins.read_overlay_layer(path, name, id_prop)
        for g, unit in best.items():
            hit = ingest_joins.spatial_join_largest_share(unit.geometry, layer)
            if hit is None:
                records[g].flags.add(f"unassigned:{name}")
            else:
                records[g].values.update(hit.attrs)
    if zip_layer:
        path, id_prop, pop_prop = zip_layer.split(":")
        layer = ingest_joins.read_overlay_layer(path, "zip", id_prop, population_property=pop_prop)
        for g, unit in best.items():
            hit = ingest_joins.assign_zip_by_population(unit.geometry, layer)
            if hit is None:
                records[g].flags.add("unassigned:zip")
            else:
                records[g].values.update(hit.attrs)
    rec_list = [records[g] for g in sorted(records)]
    if tract_csv:
        tracts = ingest_joins.read_tract_csv(tract_csv)
        ingest_joins.broadcast_tract_to_blockgroups(rec_list, tracts)
    impute_features = tuple(s.strip() for s in impute.split(",") if s.strip())
    if impute_features:
        graph = ingest_joins.build_adjacency(list(best.values()))
        ingest_joins.impute_adjacent_mean(rec_list, graph, impute_features)
    ingest_joins.write_features_csv(out, rec_list)
    click.echo(f"joined {len(rec_list)} block groups -> {out}")


@main.command("validate")
@click.option("--features", required=True, type=click.Path(exists=True))
@click.option("--report", "report_out", type=click.Path(), default=None)
@handle_errors
def validate_cmd(features, report_out):
    """Audit a feature table against the schema ranges; exit 1 on violations."""
    records = ingest_joins.read_features_csv(features)
    report = ingest_joins.validate_schema(records)
    if report_out:
        with open(report_out, "w", newline="") as fh:
            csv.writer(fh).writerows(report.csv_rows())
    nulls = sum(v.nulls for v in report.per_feature.values())
    click.echo(
        f"validated {report.n_records} records: {report.total_violations} range "
        f"violations, {nulls} nulls"
    )
    if not report.ok:
        for name, v in report.per_feature.items():
            if v.out_of_range:
                click.echo(f"  {name}: {v.out_of_range} out of range ({';'.join(v.offending)})", err=True)
        sys.exit(1)


def _load_grid(path) -> tuple[GridEntry, ...]:
    if path is None or path == "default":
        return DEFAULT_GRID
    spec = yaml.safe_load(Path(path).read_text())
    entries = []
    for row in spec["models"]:
        entries.append(GridEntry.make(row["model_id"], row["dataset"], row["algorithm"],
                                      row.get("params", {})))
    return tuple(entries)


@main.command("train")
@click.option("--features", type=click.Path(exists=True), default=None,
              help="Schema feature table (validated before training).")
@click.option("--dataset-csv", type=click.Path(exists=True), default=None,
              help="Single generic dataset reused for all four grid datasets.")
@click.option("--target", default=None, help="Target column for --dataset-csv.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--grid", "grid_path", default="default")
@click.option("--test-fraction", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--force", is_flag=True, help="Train even when validation fails.")
@click.pass_context
@handle_errors
def train_cmd(ctx, features, dataset_csv, target, out_dir, grid_path, test_fraction, seed, force):
    """Train the model grid and write metrics plus serialized ensembles."""
    cfg = ctx.obj
    seed = int(_setting(cfg, seed, "seed"))
    test_fraction = float(_setting(cfg, test_fraction, "test_fraction"))
    if (features is None) == (dataset_csv is None):
        raise ValueError("provide exactly one of --features or --dataset-csv")
    if features:
        records = ingest_joins.read_features_csv(features)
        report = ingest_joins.validate_schema(records)
        if not report.ok and not force:
            _fail(1, f"feature table has {report.total_violations} range violations "
                     "(use --force to train anyway)")
        datasets = assemble_datasets(records)
    else:
        ds = read_dataset_csv(dataset_csv, target)
        datasets = {
            tag: Dataset(ds.X, ds.y, ds.feature_names, tag)
            for tag in ("pv_count", "pv_count_policy", "pv_ratio", "pv_ratio_policy")
        }
    grid = _load_grid(grid_path)
    result = run_experiment_grid(datasets, grid, test_fraction, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_csv(out / "grid.csv", result.rows)
    for model_id, ens in result.ensembles.items():
        save_ensemble(out / f"model_{model_id}.json", ens)
    for model_id, msg in sorted(result.errors.items()):
        click.echo(f"warning: {model_id}: {msg}", err=True)
    click.echo(f"trained {len(result.rows)}/{len(grid)} models -> {out / 'grid.csv'}")


def _grid_r2(path) -> dict[str, float]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row.get("r2"):
                out[row["model"]] = float(row["r2"])
    return out


@main.command("explain")
@click.option("--models-dir", required=True, type=click.Path(exists=True))
@click.option("--grid-csv", required=True, type=click.Path(exists=True),
              help="Grid metrics CSV supplying the R² aggregation weights.")
@click.option("--dataset-csv", required=True, type=click.Path(exists=True))
@click.option("--target", default=None)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--max-shap-rows", type=int, default=200)
@handle_errors
def explain_cmd(models_dir, grid_csv, dataset_csv, target, out_dir, max_shap_rows):
    """Aggregate feature importances and emit per-instance SHAP values."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = read_dataset_csv(dataset_csv, target)
    r2 = _grid_r2(grid_csv)
    ensembles = {}
    for path in sorted(Path(models_dir).glob("model_*.json")):
        model_id = path.stem.replace("model_", "")
        ens = load_ensemble(path)
        if model_id in r2 and r2[model_id] > 0:
            ensembles[model_id] = (ens, r2[model_id])
    if not ensembles:
        raise ValueError("no models with positive R² weights to aggregate")
    # aggregation requires one shared feature set; group models accordingly
    groups: dict[tuple[str, ...], dict] = {}
    for model_id, (ens, w) in ensembles.items():
        groups.setdefault(ens.feature_names, {})[model_id] = (ens, w)
    for gi, (names, group) in enumerate(sorted(groups.items())):
        table = build_fis_table(group)
        suffix = "" if len(groups) == 1 else f"_{gi}"
        rows = fis_csv_rows(table, ds.X, ds.y, ds.feature_names)
        with open(out / f"fis{suffix}.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    n_rows = min(max_shap_rows, ds.n)
    for model_id in sorted(ensembles):
        ens, _ = ensembles[model_id]
        X = ds.X[:n_rows]
        base, Phi = shap_matrix(ens, X)
        with open(out / f"shap_{model_id}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance", "feature", "phi", "feature_value", "base_value"])
            for i in range(n_rows):
                for j, name in enumerate(ens.feature_names):
                    writer.writerow([i, name, repr(float(Phi[i, j])), repr(float(X[i, j])), repr(base)])
    click.echo(f"explained {len(ensembles)} models -> {out}")


def _dataset_columns(ds: Dataset) -> dict:
    return {name: ds.X[:, j] for j, name in enumerate(ds.feature_names)}


@main.command("ols")
@click.option("--dataset-csv", required=True, type=click.Path(exists=True))
@click.option("--target", default=None)
@click.option("--terms", required=True,
              help="'+'-separated terms; '^2' squares, '*' interacts (e.g. 'income + income^2 + income*asian').")
@click.option("--no-intercept", is_flag=True)
@click.option("--out-prefix", required=True, type=click.Path())
@handle_errors
def ols_cmd(dataset_csv, target, terms, no_intercept, out_prefix):
    """OLS with robust (HC1) standard errors; writes CSV and text tables."""
    ds = read_dataset_csv(dataset_csv, target)
    spec = LinearModelSpec(parse_terms(terms), intercept=not no_intercept)
    fit = ols_fit(_dataset_columns(ds), ds.y, spec)
    rows = ols_table_rows([fit], ["Model 1"])
    with open(f"{out_prefix}.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    Path(f"{out_prefix}.txt").write_text(ols_table_text([fit], ["Model 1"]))
    click.echo(f"OLS fit (n={fit.n}, R2={fit.r2:.3f}) -> {out_prefix}.csv/.txt")


@main.command("ame")
@click.option("--dataset-csv", required=True, type=click.Path(exists=True))
@click.option("--target", default=None)
@click.option("--terms", required=True)
@click.option("--focal", required=True)
@click.option("--moderator", required=True)
@click.option("--points", type=int, default=20)
@click.option("--out", required=True, type=click.Path())
@handle_errors
def ame_cmd(dataset_csv, target, terms, focal, moderator, points, out):
    """Average marginal effect of a focal feature across a moderator grid."""
    ds = read_dataset_csv(dataset_csv, target)
    spec = LinearModelSpec(parse_terms(terms))
    fit = ols_fit(_dataset_columns(ds), ds.y, spec)
    report = compute_ame(fit, focal, moderator, n_points=points)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["moderator_value", "ame", "se"])
        for g, a, s in zip(report.grid, report.ame, report.se):
            writer.writerow([repr(float(g)), repr(float(a)), repr(float(s))])
    click.echo(f"AME of {focal!r} across {moderator!r} -> {out}")


@main.command("synth")
@click.option("--kind", type=click.Choice(["scene", "regression"]), required=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--block-groups", type=int, default=4)
@click.option("--images-per-bg", type=int, default=12)
@click.option("--adoption", type=float, default=0.3)
@click.option("--detector", type=click.Choice(["perfect", "noisy"]), default="perfect")
@click.option("--jitter", type=float, default=1.0)
@click.option("--drop-prob", type=float, default=0.1)
@click.option("--spurious-rate", type=float, default=0.5)
@click.option("--preset", type=click.Choice(["friedman", "income-race"]), default="friedman")
@click.option("--n", type=int, default=2000)
@click.pass_context
@handle_errors
def synth_cmd(ctx, kind, out_dir, seed, block_groups, images_per_bg, adoption,
              detector, jitter, drop_prob, spurious_rate, preset, n):
    """Generate synthetic scenes or regression datasets with known truth."""
    cfg = ctx.obj
    seed = int(_setting(cfg, seed, "seed"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "scene":
        spec = synth.SceneSpec(
            n_block_groups=block_groups, images_per_bg=images_per_bg,
            pv_adoption_prob=adoption, seed=seed,
        )
        scene = synth.generate_scene(spec)
        model = synth.DetectorModel(
            mode=detector, jitter_px=jitter if detector == "noisy" else 0.0,
            drop_prob=drop_prob if detector == "noisy" else 0.0,
            spurious_rate=spurious_rate if detector == "noisy" else 0.0,
            seed=seed,
        )
        dets = synth.render_detections(scene, model)
        detect.write_groundtruth_jsonl(out / "groundtruth.jsonl", synth.scene_ground_truth(scene))
        detect.write_detections_jsonl(out / "detections.jsonl", dets)
        deploy.write_observations_jsonl(out / "observations.jsonl",
                                        synth.scene_observation_rows(scene, dets))
        deploy.write_deployment_csv(out / "truth_deployment.csv", synth.truth_deployments(scene))
        households = synth.scene_households(scene)
        with open(out / "households.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["geoid", "households"])
            for g in sorted(households):
                writer.writerow([g, households[g]])
        manifest = {"kind": "scene", "seed": seed, "detector": detector,
                    "n_block_groups": block_groups, "images_per_bg": images_per_bg,
                    "adoption": adoption}
        click.echo(f"scene with {len(scene.images)} images -> {out}")
    else:
        if preset == "friedman":
            rspec = synth.friedman_interaction_spec(n=n, seed=seed)
        else:
            rspec = synth.income_race_interaction_spec(n=n, seed=seed)
        ds, terms = synth.generate_regression(rspec)
        write_dataset_csv(out / "dataset.csv", ds)
        truth = [{"coef": t.coef, "kind": t.kind, "features": list(t.features)} for t in terms]
        (out / "truth.json").write_text(json.dumps(truth, sort_keys=True))
        manifest = {"kind": "regression", "preset": preset, "seed": seed, "n": n}
        click.echo(f"regression dataset n={ds.n} -> {out}")
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True))


@main.command("report")
@click.option("--table1", "grid_csv", required=True, type=click.Path(exists=True),
              help="Grid metrics CSV from train.")
@click.option("--out", required=True, type=click.Path())
@click.option("--text", "text_out", type=click.Path(), default=None,
              help="Also write a fixed-width text mirror.")
@handle_errors
def report_cmd(grid_csv, out, text_out):
    """Model-performance table (Model, Dataset, Algorithm, MAE, RMSE, R2)."""
    from .learn.experiment import ALGORITHM_LABELS, DATASET_LABELS

    with open(grid_csv, newline="") as fh:
        raw = list(csv.DictReader(fh))
    rows = [["Model", "Dataset", "Algorithm", "MAE", "RMSE", "R2"]]
    for r in raw:
        rows.append([
            r["model"],
            DATASET_LABELS.get(r["dataset"], r["dataset"]),
            ALGORITHM_LABELS.get(r["algorithm"], r["algorithm"]),
            f"{float(r['mae']):.3f}",
            f"{float(r['rmse']):.3f}",
            f"{100.0 * float(r['r2']):.1f}%" if r.get("r2") else "",
        ])
    with open(out, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    if text_out:
        widths = [max(len(row[i]) for row in rows) for i in range(6)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
        Path(text_out).write_text("\n".join(lines) + "\n")
    click.echo(f"performance table -> {out}")


if __name__ == "__main__":
    main()
