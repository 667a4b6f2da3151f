"""Command-line pipeline: synth, preprocess, train, sweep, dre, kde, report.

Every subcommand reads a flat ``key = value`` config file (optional), applies
``--set key=value`` and dedicated flag overrides, writes the resolved config to
``<out>/run.config`` and merges its headline numbers into ``<out>/run.summary``.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import coherence, ingest, lda, nmf, render, spatialdre, synth, textpipe

log = logging.getLogger("incident_topics")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


@dataclass
class RunConfig:
    out: str = "run"
    run_id: str = "run"
    input: Optional[str] = None
    input_format: str = "csv"
    stoplist: Optional[str] = None
    tfidf_quantile: float = 0.2
    topics: int = 5
    t_min: int = 2
    t_max: int = 19
    seed: int = 0
    nmf_max_iters: int = 400
    nmf_tol: float = 1e-5
    lda_alpha: Optional[float] = None
    lda_eta_w: float = 0.01
    lda_iters: int = 1000
    lda_burn_in: int = 500
    n_top: int = 10
    report_top: int = 5
    k: int = 50
    resolution: int = 1000
    smooth_cells: float = 8.0
    smooth_bandwidth: Optional[float] = None
    kde_bandwidth: Optional[float] = None
    kde_resolution: Optional[int] = None
    threshold: float = 0.5
    n_samples: int = 4000
    radius_cutoff: Optional[float] = None
    ratio_scale: str = "log1p"
    grid_csv: str = "auto"
    synth_docs: int = 2000
    synth_topics: int = 5
    synth_vocab: int = 100
    synth_doc_length: float = 50.0
    synth_mixing: float = 0.1
    synth_sentence_length: int = 8
    synth_sigma: float = 1000.0
    synth_spacing: float = 3000.0
    synth_origin_lat: float = 33.749
    synth_origin_lon: float = -84.388

    def snapshot(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"


def _coerce(name, raw):
    ftype = {f.name: f.type for f in fields(RunConfig)}.get(name)
    if ftype is None:
        raise ConfigError(f"unknown config key {name!r}")
    raw = raw.strip()
    optional = "Optional" in str(ftype)
    if optional and raw in ("", "none", "None"):
        return None
    base = str(ftype)
    try:
        if "int" in base:
            return int(raw)
        if "float" in base:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_config_text(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    return values


def resolve_config(path=None, overrides=()):
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value)
    cfg = RunConfig(**values)
    if not 0.0 <= cfg.tfidf_quantile < 1.0:
        raise ConfigError("tfidf_quantile must lie in [0, 1)")
    if not 0.0 < cfg.threshold <= 1.0:
        raise ConfigError("threshold must lie in (0, 1]")
    if cfg.k < 1 or cfg.resolution < 2:
        raise ConfigError("k must be >= 1 and resolution >= 2")
    return cfg


# ---------------------------------------------------------------- run folder

def out_dir(cfg):
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def update_summary(cfg, section, data):
    path = out_dir(cfg) / "run.summary"
    summary = json.loads(path.read_text()) if path.exists() else {}
    summary[section] = data
    write_json(path, summary)


def input_path(cfg):
    if cfg.input:
        return Path(cfg.input)
    return out_dir(cfg) / "incidents.csv"


def load_records(cfg):
    try:
        records, diagnostics = ingest.load_incidents(input_path(cfg), cfg.input_format)
    except ingest.IngestError as exc:
        raise DataError(f"ingest: {exc}") from exc
    return records, diagnostics


def corpus_paths(cfg):
    d = out_dir(cfg)
    return d / "dictionary.tsv", d / "corpus.txt"


def load_corpus(cfg):
    dict_path, corpus_path = corpus_paths(cfg)
    if not dict_path.exists() or not corpus_path.exists():
        raise DataError("corpus not found; run preprocess first")
    return textpipe.Corpus.load(dict_path, corpus_path)


def model_prefix(cfg, name):
    d = out_dir(cfg) / "models"
    d.mkdir(exist_ok=True)
    return d / name


def load_model(cfg, name, terms):
    prefix = model_prefix(cfg, name)
    if name.startswith("nmf"):
        if not prefix.with_name(name + ".W.txt").exists():
            raise DataError(f"model {name} not found")
        return nmf.NmfModel.load(prefix, terms)
    if name.startswith("lda"):
        if not prefix.with_name(name + ".phi.txt").exists():
            raise DataError(f"model {name} not found")
        return lda.LdaModel.load(prefix, terms)
    raise ConfigError(f"model name {name!r} must start with nmf or lda")


def trainer_params(cfg, method):
    if method == "nmf":
        return {"max_iters": cfg.nmf_max_iters, "tol": cfg.nmf_tol}
    if method == "lda":
        return {"alpha": cfg.lda_alpha, "eta_w": cfg.lda_eta_w, "iters": cfg.lda_iters,
                "burn_in": cfg.lda_burn_in}
    raise ConfigError(f"unknown method {method!r}")


def doc_topic_weights(model):
    module = nmf if isinstance(model, nmf.NmfModel) else lda
    return module.doc_topic_matrix(model)


# ---------------------------------------------------------------- synth

def synth_truth(cfg):
    M = cfg.synth_topics
    comps = []
    for m in range(M):
        angle = 2 * math.pi * m / M
        center = (0.0, 0.0) if M == 1 else (cfg.synth_spacing * math.cos(angle),
                                           cfg.synth_spacing * math.sin(angle))
        comps.append((m, center, cfg.synth_sigma))
    return synth.SpatialMixtureSpec(components=tuple(comps), rho=tuple([1.0 / M] * M),
                                    n=cfg.synth_docs, seed=cfg.seed)


def synth_to_latlon(cfg, xy):
    lat = cfg.synth_origin_lat + np.degrees(xy[:, 1] / ingest.EARTH_RADIUS_M)
    lon = cfg.synth_origin_lon + np.degrees(
        xy[:, 0] / (ingest.EARTH_RADIUS_M * math.cos(math.radians(cfg.synth_origin_lat))))
    return lat, lon


def latlon_to_synth(cfg, lat, lon):
    y = np.radians(np.asarray(lat) - cfg.synth_origin_lat) * ingest.EARTH_RADIUS_M
    x = (np.radians(np.asarray(lon) - cfg.synth_origin_lon) * ingest.EARTH_RADIUS_M
         * math.cos(math.radians(cfg.synth_origin_lat)))
    return np.column_stack([x, y])


def cmd_synth(cfg, args):
    """Planted-topic narratives placed at Gaussian-mixture locations, label = planted topic."""
    spec = synth.PlantedCorpusSpec(t=cfg.synth_topics, vocab_per_topic=cfg.synth_vocab, docs=cfg.synth_docs,
                                   doc_length=cfg.synth_doc_length, topic_mixing=cfg.synth_mixing,
                                   seed=cfg.seed)
    planted = synth.generate_corpus(spec)
    mix = synth_truth(cfg)
    # locations follow each document's planted topic
    xy = synth.place_points(mix, planted.assignments, cfg.seed)
    lat, lon = synth_to_latlon(cfg, xy)

    L = cfg.synth_sentence_length
    records = []
    for i, toks in enumerate(planted.token_lists):
        sentences = [" ".join(toks[j:j + L]) for j in range(0, len(toks), L)]
        narrative = ". ".join(s.capitalize() for s in sentences) + "."
        minute = i % (24 * 60)
        records.append(ingest.IncidentRecord(
            f"inc{i:06d}", narrative, f"C{planted.assignments[i]}", float(lat[i]), float(lon[i]),
            f"2015-01-{1 + (i // 1440) % 28:02d}T{minute // 60:02d}:{minute % 60:02d}:00"))
    d = out_dir(cfg)
    ingest.save_incidents(records, d / "incidents.csv")
    truth = {"components": [[c[0], list(c[1]), c[2]] for c in mix.components], "rho": list(mix.rho),
             "origin_lat": cfg.synth_origin_lat, "origin_lon": cfg.synth_origin_lon,
             "planted_words": [w[:cfg.n_top] for w in planted.planted_words],
             "label_prefix": "C"}
    write_json(d / "synth.json", truth)
    return {"records": len(records), "topics": spec.t, "vocab": spec.t * spec.vocab_per_topic}


# ---------------------------------------------------------------- preprocess

def cmd_preprocess(cfg, args):
    records, diagnostics = load_records(cfg)
    d = out_dir(cfg)
    ingest.write_diagnostics(diagnostics, d / "diagnostics.jsonl")
    stoplist = textpipe.load_stoplist(cfg.stoplist)
    try:
        result = textpipe.preprocess([r.narrative for r in records], stoplist, cfg.tfidf_quantile,
                                     doc_ids=[r.id for r in records])
    except ValueError as exc:
        raise DataError(f"textpipe: {exc}") from exc
    result.corpus.save(*corpus_paths(cfg))
    stats = dict(result.stats, rows_rejected=len(diagnostics))
    freq = ingest.label_frequency(records)
    with open(d / "label_frequency.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("call_type,count\n")
        for code, count in freq:
            fh.write(f"{code},{count}\n")
    write_json(d / "preprocess_stats.json", stats)
    return stats


# ---------------------------------------------------------------- train

def write_top_words(path, model, method, terms, n):
    module = nmf if method == "nmf" else lda
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("topic_id\tword\tweight\n")
        for k in range(model.t):
            for word, weight in module.top_words(model, k, min(n, len(terms)), terms):
                fh.write(f"{method.upper()}{k}\t{word}\t{weight:.6g}\n")


def cmd_train(cfg, args):
    method = args.method or "nmf"
    t = args.t or cfg.topics
    corpus = load_corpus(cfg)
    terms = corpus.dictionary.id2token
    C = corpus.to_matrix()
    try:
        model = coherence.train(method, C, t, cfg.seed, terms=terms, **trainer_params(cfg, method))
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc
    W = model.topic_word
    if not np.all(np.isfinite(W)):
        raise NumericError(f"{method} produced non-finite weights")
    name = f"{method}_t{t}"
    model.save(model_prefix(cfg, name))
    write_top_words(out_dir(cfg) / f"topwords_{name}.tsv", model, method, terms, cfg.report_top)
    module = nmf if method == "nmf" else lda
    n = min(cfg.report_top, len(terms))
    summary = {"model": name, "iters": model.iters,
               "top_words": {f"{method.upper()}{k}": [w for w, _ in module.top_words(model, k, n, terms)]
                             for k in range(t)}}
    if method == "nmf":
        summary["objective"] = model.objective_trace[-1]
    else:
        summary["log_likelihood"] = lda.log_likelihood(model, C)
    return summary


# ---------------------------------------------------------------- sweep

def cmd_sweep(cfg, args):
    methods = ["nmf", "lda"] if args.method in (None, "both") else [args.method]
    t_min = args.t_min or cfg.t_min
    t_max = args.t_max or cfg.t_max
    corpus = load_corpus(cfg)
    terms = corpus.dictionary.id2token
    C = corpus.to_matrix()
    index = coherence.DocFreqIndex(C, terms)
    rows = {}
    for method in methods:
        try:
            rows[method] = coherence.coherence_sweep(C, t_min, t_max, method, cfg.seed, terms=terms,
                                                     n_top=min(cfg.n_top, len(terms)), index=index,
                                                     **trainer_params(cfg, method))
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc
        if not all(math.isfinite(s) for _, s in rows[method]):
            raise NumericError(f"non-finite coherence in {method} sweep")
    coherence.write_sweep_csv(out_dir(cfg) / "coherence.csv", rows)
    return {m: [[t, s] for t, s in r] for m, r in rows.items()}


# ---------------------------------------------------------------- dre / kde

def parse_label_source(spec, cfg):
    """``call_type`` or ``topic:<model>[,threshold]``."""
    if spec in (None, "call_type"):
        return "call_type", None, None
    if spec == "all":
        return "all", None, None
    if spec.startswith("topic:"):
        body = spec[len("topic:"):]
        name, _, thr = body.partition(",")
        return "topic", name, float(thr) if thr else cfg.threshold
    raise ConfigError(f"unknown label source {spec!r}")


def labeled_points(cfg, source):
    """Projected points, integer labels, label names, per-point topic weights, and exclusions."""
    kind, model_name, threshold = source
    records, _ = load_records(cfg)
    proj = ingest.Projection.from_records(records)
    xy = proj.to_array(records)
    info = {"records": len(records)}
    if kind == "all":
        return xy, np.zeros(len(records), dtype=np.int64), ["all"], None, proj, info
    if kind == "call_type":
        names = sorted({r.call_type for r in records})
        lookup = {n: i for i, n in enumerate(names)}
        labels = np.array([lookup[r.call_type] for r in records], dtype=np.int64)
        return xy, labels, names, None, proj, info
    corpus = load_corpus(cfg)
    model = load_model(cfg, model_name, corpus.dictionary.id2token)
    weights, degenerate = doc_topic_weights(model)
    pos = {r.id: i for i, r in enumerate(records)}
    rows = np.array([pos[d] for d in corpus.doc_ids if d in pos], dtype=np.int64)
    if len(rows) != len(corpus.doc_ids):
        raise DataError("corpus documents do not match the incident records")
    argmax = weights.argmax(axis=1)
    keep = (weights[np.arange(len(weights)), argmax] >= threshold) & ~degenerate
    info.update(excluded_below_threshold=int((~keep).sum()), threshold=threshold, model=model_name)
    names = [f"{model_name.split('_')[0].upper()}{k}" for k in range(model.t)]
    return xy[rows[keep]], argmax[keep], names, (weights, xy[rows], degenerate), proj, info


def _compact_labels(labels, names):
    present = sorted(set(labels.tolist()))
    skipped = [names[m] for m in range(len(names)) if m not in present]
    remap = {m: i for i, m in enumerate(present)}
    return np.array([remap[m] for m in labels], dtype=np.int64), [names[m] for m in present], skipped


def _probe_error(cfg, grid, proj, truth_path):
    """Mean |g - r| over a 10 × 10 lattice of cells, against the synthetic truth."""
    truth = json.loads(Path(truth_path).read_text())
    spec = synth.SpatialMixtureSpec(components=tuple((c[0], tuple(c[1]), c[2]) for c in truth["components"]),
                                    rho=tuple(truth["rho"]), n=1)
    ratio = synth.MixtureRatio(spec)
    xs, ys = grid.centers()
    step = max(grid.resolution // 10, 1)
    ix = np.arange(step // 2, grid.resolution, step)[:10]
    gx, gy = np.meshgrid(xs[ix], ys[ix])
    lat, lon = proj.inverse(gx.ravel(), gy.ravel())
    r = ratio(latlon_to_synth(cfg, lat, lon))
    out = {}
    for m, name in enumerate(grid.labels):
        if not name.startswith(truth["label_prefix"]):
            continue
        comp = int(name[len(truth["label_prefix"]):])
        est = grid.values[m][np.ix_(ix, ix)].ravel()
        out[name] = float(np.mean(np.abs(est - r[:, comp])))
    return out


def _grid_csv_wanted(cfg, grid):
    if cfg.grid_csv == "auto":
        return grid.values.size <= 1_000_000
    return cfg.grid_csv in ("yes", "true", "1")


def cmd_dre(cfg, args):
    source = parse_label_source(args.labels, cfg)
    xy, labels, names, _, proj, info = labeled_points(cfg, source)
    if len(xy) == 0:
        raise DataError("no labeled points")
    labels, names, skipped = _compact_labels(labels, names)
    k = min(cfg.k, len(xy))
    index = spatialdre.SpatialIndex(xy, labels, len(names))
    weights = spatialdre.MixtureWeights.from_index(index)
    bbox = spatialdre.default_bbox(proj.to_array(load_records(cfg)[0]))
    grid = spatialdre.evaluate_grid(index, weights, bbox, cfg.resolution, k, labels=names)
    bandwidth = cfg.smooth_bandwidth or cfg.smooth_cells * grid.cell_size[0]
    smoothed = spatialdre.smooth_grid(grid, bandwidth)
    if not (np.all(np.isfinite(grid.values)) and np.all(np.isfinite(smoothed.values))):
        raise NumericError("non-finite density ratio")

    d = out_dir(cfg) / "grids"
    d.mkdir(exist_ok=True)
    tag = source[0] if source[0] != "topic" else source[1]
    run = f"{cfg.run_id}_{tag}"
    grid.save_raster(d / f"{run}_ratio.bin")
    smoothed.save_raster(d / f"{run}_ratio_smoothed.bin")
    if _grid_csv_wanted(cfg, grid):
        grid.to_csv(d / f"{run}_ratio.csv")
    img_dir = out_dir(cfg) / "images"
    img_dir.mkdir(exist_ok=True)
    for m, name in enumerate(names):
        for kind, g in (("ratio", grid), ("ratio_smoothed", smoothed)):
            img = render.render_heatmap(g.values[m], "diverging", cfg.ratio_scale)
            render.write_image(img, img_dir / render.image_name(run, name, kind))

    summary = dict(info, k=k, resolution=cfg.resolution, bandwidth=bandwidth, skipped_labels=skipped,
                   rho_hat={n: float(r) for n, r in zip(names, weights.rho_hat)},
                   max_neighbor_total=int(grid.neighbor_total.max()),
                   raw=grid.summary(cfg.radius_cutoff), smoothed=smoothed.summary(cfg.radius_cutoff))
    truth = out_dir(cfg) / "synth.json"
    if source[0] == "call_type" and truth.exists():
        summary["probe_mae"] = _probe_error(cfg, grid, proj, truth)
    return summary


def cmd_kde(cfg, args):
    source = parse_label_source(args.labels, cfg)
    xy, labels, names, topic_data, proj, info = labeled_points(cfg, source)
    bbox = spatialdre.default_bbox(proj.to_array(load_records(cfg)[0]))
    resolution = cfg.kde_resolution or cfg.resolution
    if source[0] == "topic":
        weights_matrix, doc_xy, degenerate = topic_data
        topic = args.topic if args.topic is not None else 0
        try:
            sample = spatialdre.sample_topic_incidents(weights_matrix, topic, source[2], cfg.n_samples, cfg.seed)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        pts, w = doc_xy[sample.indices], sample.weights
        label = names[0][:-1] + str(topic) if names else f"topic{topic}"
        info.update(sampled=len(sample.indices), shortfall=sample.shortfall)
    else:
        if source[0] == "call_type" and args.label is not None:
            if args.label not in names:
                raise DataError(f"no incidents with call type {args.label!r}")
            mask = labels == names.index(args.label)
            label = args.label
        else:
            mask = np.ones(len(xy), dtype=bool)
            label = "all"
        qualifying = np.flatnonzero(mask)
        sample = spatialdre.sample_topic_incidents(np.ones((len(qualifying), 1)), 0, 1.0, cfg.n_samples, cfg.seed)
        pts, w = xy[qualifying[sample.indices]], np.ones(len(sample.indices))
        info.update(sampled=len(sample.indices), shortfall=sample.shortfall)
    dens = spatialdre.weighted_kde(pts, w, bbox, resolution, cfg.kde_bandwidth)
    if not np.all(np.isfinite(dens.values)):
        raise NumericError("non-finite density")
    tag = source[0] if source[0] != "topic" else source[1]
    run = f"{cfg.run_id}_{tag}"
    d = out_dir(cfg) / "grids"
    d.mkdir(exist_ok=True)
    np.ascontiguousarray(dens.values, dtype="<f8").tofile(d / f"{run}_{label}_kde.bin")
    write_json(d / f"{run}_{label}_kde.bin.json", {"bbox": list(bbox), "resolution": resolution,
                                                   "bandwidth": list(dens.bandwidth), "dtype": "<f8"})
    img_dir = out_dir(cfg) / "images"
    img_dir.mkdir(exist_ok=True)
    render.write_image(render.render_heatmap(dens.values, "grayscale", "linear"),
                       img_dir / render.image_name(run, label, "kde"))
    return dict(info, label=label, resolution=resolution, bandwidth=list(dens.bandwidth),
                argmax=list(dens.argmax_point()), integral=float(dens.values.sum() * dens.cell_area))


# ---------------------------------------------------------------- report

def cmd_report(cfg, args):
    d = out_dir(cfg)
    path = d / "run.summary"
    summary = json.loads(path.read_text()) if path.exists() else {}
    lines = []
    freq_path = d / "label_frequency.csv"
    if freq_path.exists():
        lines.append("Incidents per call type")
        for row in freq_path.read_text().splitlines()[1:11]:
            code, count = row.split(",")
            lines.append(f"  {code:>8} {count:>8}")
    for name in sorted(p.name for p in d.glob("topwords_*.tsv")):
        lines.append(f"Top words ({name[len('topwords_'):-4]})")
        for row in (d / name).read_text().splitlines()[1:]:
            topic, word, weight = row.split("\t")
            lines.append(f"  {topic:>6} {word:<24} {weight}")
    coh = d / "coherence.csv"
    if coh.exists():
        lines.append("UMass coherence")
        for row in coh.read_text().splitlines()[1:]:
            t, method, score = row.split(",")
            lines.append(f"  t={t:>2} {method} {float(score):.5f}")
    for key in sorted(summary):
        if key.startswith("dre"):
            lines.append(f"Density ratio summary ({key})")
            for row in summary[key]["smoothed"]:
                lines.append(f"  {row['label']}: max {row['max']:.3f} min {row['min']:.3f}")
    (d / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"lines": len(lines)}


COMMANDS = {"synth": cmd_synth, "preprocess": cmd_preprocess, "train": cmd_train, "sweep": cmd_sweep,
            "dre": cmd_dre, "kde": cmd_kde, "report": cmd_report}


def build_parser():
    parser = argparse.ArgumentParser(prog="incident-topics", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--input", help="incident file (csv or jsonl)")
        p.add_argument("--seed", type=int)
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        if name in ("train", "sweep"):
            p.add_argument("--method", choices=["nmf", "lda"] + (["both"] if name == "sweep" else []))
        if name == "train":
            p.add_argument("--t", type=int, help="topic count")
        if name == "sweep":
            p.add_argument("--t-min", type=int)
            p.add_argument("--t-max", type=int)
        if name in ("dre", "kde"):
            p.add_argument("--labels", default="call_type",
                           help="call_type, all, or topic:<model>[,threshold] e.g. topic:nmf_t5,0.5")
        if name == "kde":
            p.add_argument("--topic", type=int)
            p.add_argument("--label", help="call type to map when --labels call_type")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        for key in ("out", "input", "seed"):
            value = getattr(args, key)
            if value is not None:
                overrides.append(f"{key}={value}")
        cfg = resolve_config(args.config, overrides)
        out_dir(cfg).joinpath("run.config").write_text(cfg.snapshot(), encoding="utf-8")
        result = COMMANDS[args.command](cfg, args)
        section = args.command
        if args.command == "train":
            section = f"train_{result['model']}"
        elif args.command in ("dre", "kde"):
            section = f"{args.command}_{args.labels}"
            if getattr(args, "topic", None) is not None:
                section += f"_{args.topic}"
            if getattr(args, "label", None):
                section += f"_{args.label}"
        update_summary(cfg, section, result)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, spatialdre.DensityRatioError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericError, lda.CountTableError, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
