"""Data-preparation schemes, experiment runs, benchmarks and inference.

A scheme is a pair (cleaning, segmentation):

====  ==============  ===================
name  cleaning        segmentation
====  ==============  ===================
p-t   full pipeline   label timestamps
p-h   full pipeline   gyroscope PAPR peaks
r-t   calibration     label timestamps
r-h   calibration     gyroscope PAPR peaks
====  ==============  ===================

Peak detection always runs on a zero-baseline gyroscope signal. For
preprocessed schemes that is the filtered signal before its final [-1, 1]
rescale, which can shift the baseline away from zero and swamp the
peak-to-average ratio. Frames fed to classifiers are the rescaled ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

from .core import KEYPAD_ALPHABET, LabelCodebook, RecordingSession
from .evaluation import (
    DEFAULT_EPOCHS,
    DEFAULT_FOLDS,
    DEFAULT_HIDDEN,
    TRANSFER_EPOCHS,
    EvaluationReport,
    ModelSpec,
    cross_validate,
    evaluate_model,
    f1_score,
    fit_model,
    reliability,
    train_and_evaluate,
)
from .features import SEGMENT, STATISTICAL, FeatureMatrix, build_segment_features, build_statistical_features, unlabeled_rows
from .fusion import STRATEGIES, FusionConfig, fuse_session, resample_constant_rate, strategy_frames
from .nn.network import NetworkModel
from .preprocess import PreprocessConfig, preprocess_pipeline, rescale_session
from .segmentation import (
    HALF_WINDOW,
    MATCH_TOLERANCE_MS,
    PEAK_THRESHOLD,
    Segment,
    estimate_peak_lag,
    match_labels_to_peaks,
    segment_by_labels,
    segment_by_peaks,
)

log = logging.getLogger(__name__)

SCHEMES = ("p-t", "p-h", "r-t", "r-h")
MODEL_FEATURES = {
    "fnn-sigmoid": STATISTICAL,
    "fnn-tanh": SEGMENT,
    "rnn-lstm": SEGMENT,
    "rnn-lstm-peephole": SEGMENT,
}
EXPERIMENT_MODELS = ("fnn-sigmoid", "fnn-tanh", "rnn-lstm")

# Hidden-layer benchmark rows: reference, network kind, feature kind.
MODEL_BENCHMARK_ROWS = (
    ("A", "fnn-sigmoid", STATISTICAL),
    ("B", "fnn-tanh", STATISTICAL),
    ("C", "fnn-sigmoid", SEGMENT),
    ("D", "fnn-tanh", SEGMENT),
    ("E", "rnn-lstm", SEGMENT),
    ("F", "rnn-lstm-peephole", SEGMENT),
)
FUSION_BENCHMARK_HIDDEN = 9
FUSION_BENCHMARK_LABELS = 4


def scheme_name(name: str) -> str:
    key = name.strip().lower()
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    return key


def is_raw(scheme: str) -> bool:
    return scheme_name(scheme).startswith("r")


def is_heuristic(scheme: str) -> bool:
    return scheme_name(scheme).endswith("h")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything between a stored session and labelled segments.

    ``peak_lag_ms`` shifts label times before they are matched to peaks;
    ``None`` estimates the shift from the session itself (the filters
    delay peaks by a near-constant amount).
    """

    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    half_window: int = HALF_WINDOW
    peak_threshold: float = PEAK_THRESHOLD
    match_tolerance_ms: float = MATCH_TOLERANCE_MS
    peak_lag_ms: float | None = None

    def __post_init__(self):
        if self.half_window < 1:
            raise ValueError("half_window must be >= 1")
        if self.match_tolerance_ms < 0:
            raise ValueError("match_tolerance_ms must be >= 0")

    def with_strategy(self, strategy: str) -> PipelineConfig:
        return replace(self, fusion=replace(self.fusion, strategy=strategy))


def codebook_for(sessions: Sequence[RecordingSession]) -> LabelCodebook:
    """Codebook over the labels present, keypad order first."""
    present = []
    for s in sessions:
        for lab in s.labels:
            if lab.label not in present:
                present.append(lab.label)
    if not present:
        raise ValueError("sessions carry no labels")
    ordered = [k for k in KEYPAD_ALPHABET if k in present]
    ordered += sorted(k for k in present if k not in KEYPAD_ALPHABET)
    return LabelCodebook(ordered)


def segment_session(
    session: RecordingSession,
    scheme: str,
    config: PipelineConfig | None = None,
    trace: list[str] | None = None,
    labelled: bool = True,
) -> list[Segment]:
    """Clean, fuse and cut ``session`` under ``scheme``.

    With ``labelled`` every returned segment carries a key label (peaks
    without a nearby label are dropped). Without it, heuristic schemes
    return every detected window unlabelled; timestamp schemes need labels
    either way.
    """
    config = config or PipelineConfig()
    scheme = scheme_name(scheme)
    trace = [] if trace is None else trace
    cleaned = preprocess_pipeline(session, config.preprocess, raw=is_raw(scheme), trace=trace, rescale=False)
    unscaled_gyro = cleaned.gyroscope
    if not is_raw(scheme):
        cleaned = rescale_session(cleaned, trace)
    seq = fuse_session(cleaned, config.fusion)
    trace.append(f"fuse:{seq.strategy}")
    if not is_heuristic(scheme):
        trace.append("segment:labels")
        return segment_by_labels(seq, session.labels, config.half_window)
    gyro = resample_constant_rate(unscaled_gyro, config.fusion.interval_ms)
    segs = segment_by_peaks(seq, gyro.values, config.half_window, config.peak_threshold)
    trace.append("segment:peaks")
    if not labelled:
        return segs
    lag = config.peak_lag_ms
    if lag is None:
        lag = estimate_peak_lag(segs, session.labels)
    trace.append("segment:match")
    matched = match_labels_to_peaks(segs, session.labels, config.match_tolerance_ms, lag)
    log.info("%s: %d peaks, %d matched to %d labels (lag %.1f ms)",
             session.session_id, len(segs), len(matched), len(session.labels), lag)
    return matched


def build_features(segments: Sequence[Segment], codebook: LabelCodebook, kind: str, threshold=PEAK_THRESHOLD) -> FeatureMatrix:
    """Unscaled labelled features of ``kind``."""
    if not segments:
        raise ValueError("no labelled segments to build features from")
    if kind == STATISTICAL:
        return build_statistical_features(segments, codebook, normalize=False, threshold=threshold)
    if kind == SEGMENT:
        return build_segment_features(segments, codebook, normalize=False)
    raise ValueError(f"unknown feature kind {kind!r}")


def session_features(
    sessions: Sequence[RecordingSession],
    scheme: str,
    kind: str,
    codebook: LabelCodebook | None = None,
    config: PipelineConfig | None = None,
    trace: list[str] | None = None,
) -> FeatureMatrix:
    config = config or PipelineConfig()
    codebook = codebook or codebook_for(sessions)
    segs = []
    for s in sessions:
        segs += segment_session(s, scheme, config, trace)
    return build_features(segs, codebook, kind, config.peak_threshold)


def _check_model(model: str) -> str:
    if model not in MODEL_FEATURES:
        raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODEL_FEATURES)}")
    return model


def run_experiment(
    scheme: str,
    model: str,
    train_sessions: Sequence[RecordingSession],
    eval_sessions: Sequence[RecordingSession] | None = None,
    *,
    config: PipelineConfig | None = None,
    epochs: int | None = None,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    n_hidden: int = DEFAULT_HIDDEN,
    batch: bool = True,
    trace: list[str] | None = None,
) -> EvaluationReport:
    """One experiment run.

    Without ``eval_sessions`` this is k-fold cross-validation over the
    training sessions (100 epochs by default). With them, one model is
    trained on all training sessions (200 epochs by default) and scored
    once on the evaluation sessions.
    """
    scheme = scheme_name(scheme)
    kind = MODEL_FEATURES[_check_model(model)]
    config = config or PipelineConfig()
    spec = ModelSpec(model, n_hidden, batch)
    meta = {"scheme": scheme, "model": model, "features": kind, "strategy": config.fusion.strategy}
    if eval_sessions:
        codebook = codebook_for(list(train_sessions) + list(eval_sessions))
        train_fm = session_features(train_sessions, scheme, kind, codebook, config, trace)
        eval_fm = session_features(eval_sessions, scheme, kind, codebook, config, trace)
        report, _ = train_and_evaluate(
            spec, train_fm, eval_fm, TRANSFER_EPOCHS if epochs is None else epochs, seed, {**meta, "mode": "transfer"}
        )
        return report
    fm = session_features(train_sessions, scheme, kind, None, config, trace)
    return cross_validate(spec, fm, folds, DEFAULT_EPOCHS if epochs is None else epochs, seed, {**meta, "mode": "cv"})


def train_final_model(
    scheme: str,
    model: str,
    sessions: Sequence[RecordingSession],
    *,
    config: PipelineConfig | None = None,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    n_hidden: int = DEFAULT_HIDDEN,
    batch: bool = True,
) -> tuple[NetworkModel, list[float]]:
    """Train on every labelled segment; the model remembers how to prepare inputs."""
    scheme = scheme_name(scheme)
    kind = MODEL_FEATURES[_check_model(model)]
    config = config or PipelineConfig()
    fm = session_features(sessions, scheme, kind, None, config)
    net, trace = fit_model(ModelSpec(model, n_hidden, batch), fm, epochs, seed)
    net.metadata.update({
        "scheme": scheme,
        "strategy": config.fusion.strategy,
        "interval_ms": str(config.fusion.interval_ms),
        "half_window": str(config.half_window),
        "peak_threshold": repr(config.peak_threshold),
        "epochs": str(epochs),
        "seed": str(seed),
    })
    return net, trace


@dataclass(frozen=True)
class Prediction:
    t: int
    center: int
    label: str
    distribution: tuple[float, ...]
    reliability: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "center": self.center,
            "label": self.label,
            "distribution": list(self.distribution),
            "reliability": self.reliability,
        }


def inference_config(model: NetworkModel, base: PipelineConfig | None = None) -> PipelineConfig:
    """Pipeline settings recorded in ``model`` layered over ``base``."""
    base = base or PipelineConfig()
    meta = model.metadata
    fusion = FusionConfig(int(meta.get("interval_ms", base.fusion.interval_ms)), meta.get("strategy", base.fusion.strategy))
    return replace(
        base,
        fusion=fusion,
        half_window=int(meta.get("half_window", base.half_window)),
        peak_threshold=float(meta.get("peak_threshold", base.peak_threshold)),
    )


def infer(
    model: NetworkModel,
    session: RecordingSession,
    scheme: str | None = None,
    config: PipelineConfig | None = None,
) -> list[Prediction]:
    """Classify every heuristically detected keystroke in ``session``."""
    stored = model.metadata.get("scheme")
    scheme = scheme_name(scheme or stored or "")
    if stored and scheme != stored:
        raise ValueError(f"model was trained on scheme {stored}, not {scheme}")
    heuristic = scheme[0] + "-h"
    config = inference_config(model, config)
    segs = segment_session(session, heuristic, config, labelled=False)
    if not segs:
        return []
    rows = model.prepare(unlabeled_rows(segs, model.feature_kind, config.peak_threshold))
    out = []
    for seg, row in zip(segs, rows):
        label, p = model.predict(row)
        out.append(Prediction(seg.t, seg.center, label, tuple(float(v) for v in p), reliability(p)))
    return out


@dataclass(frozen=True)
class BenchmarkRow:
    name: str
    f1_mean: float
    reliability_mean: float
    f1_std: float = 0.0
    reliability_std: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "reliability_mean": self.reliability_mean,
            "reliability_std": self.reliability_std,
            **self.detail,
        }


def benchmark_fusion(
    session: RecordingSession,
    *,
    scheme: str = "p-t",
    config: PipelineConfig | None = None,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    n_hidden: int = FUSION_BENCHMARK_HIDDEN,
    batch: bool = True,
) -> list[BenchmarkRow]:
    """Train a small LSTM per fusion strategy and score it on its own training data."""
    codebook = codebook_for([session])
    if len(codebook) != FUSION_BENCHMARK_LABELS:
        raise ValueError(f"fusion benchmark needs {FUSION_BENCHMARK_LABELS} labels, found {len(codebook)}")
    config = config or PipelineConfig()
    base = segment_session(session, scheme, config.with_strategy("G3A3"))
    rows = []
    for strategy in STRATEGIES:
        segs = _reslice(base, strategy)
        fm = build_features(segs, codebook, SEGMENT)
        net, _ = fit_model(ModelSpec("rnn-lstm", n_hidden, batch), fm, epochs, seed)
        cm, rel = evaluate_model(net, fm.normalized(net.scaler))
        rows.append(BenchmarkRow(strategy, f1_score(cm), rel, detail={"dim": fm.sequence_shape[1]}))
        log.info("fusion %s: f1=%.3f reliability=%.3f", strategy, rows[-1].f1_mean, rel)
    return rows


def _reslice(segments: Sequence[Segment], strategy: str) -> list[Segment]:
    return [Segment(s.center, s.t, strategy_frames(s.sensor_axes, strategy), s.sensor_axes, s.label) for s in segments]


def benchmark_models(
    sessions: Sequence[RecordingSession],
    *,
    scheme: str = "p-t",
    config: PipelineConfig | None = None,
    epochs: int = DEFAULT_EPOCHS,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    n_hidden: int = DEFAULT_HIDDEN,
    batch: bool = True,
) -> list[BenchmarkRow]:
    """The six hidden-layer / feature-kind combinations under k-fold CV."""
    config = config or PipelineConfig()
    codebook = codebook_for(sessions)
    segs = []
    for s in sessions:
        segs += segment_session(s, scheme, config)
    features = {kind: build_features(segs, codebook, kind, config.peak_threshold) for kind in (STATISTICAL, SEGMENT)}
    rows = []
    for ref, kind, feat in MODEL_BENCHMARK_ROWS:
        report = cross_validate(ModelSpec(kind, n_hidden, batch), features[feat], folds, epochs, seed)
        rows.append(BenchmarkRow(
            ref, report.f1_mean, report.reliability_mean, report.f1_std, report.reliability_std,
            {"hidden": kind, "features": feat},
        ))
        log.info("model %s (%s, %s): f1=%.3f", ref, kind, feat, report.f1_mean)
    return rows
