"""Receiver pipeline orchestration: detect, fork, denoise, analyze, feed back.

The receiver works in keyframe cohorts (a keyframe plus the cadence-1 frames
after it). The detector runs once per keyframe; the whole cohort follows its
BYPASS/DENOISE routing. A cohort's temporal windows may reach two frames past
the cohort end, so a cohort completes only once received index
min(cohort_end + 2, n - 1) has arrived; window positions landing on keyframe
indices use the keyframe's finished output (denoised or passed through,
whatever its own cohort decided).

Two execution modes share the same stage objects and therefore the exact same
arithmetic: `sequential` chains the stages in one loop, `threaded` connects
them with bounded in-order queues (capacity 8). Both must produce
bit-identical videos, reports, and feedback logs.

Determinism versus timing: reports and the feedback policy carry a *modeled*
runtime (a fixed cost in nanoseconds per pixel per unit of work, calibrated
once against a desktop core), because measured wall time can never be
bit-identical across runs or execution modes. Bypassed frames report zero
runtime and zero sigma delta by definition: no work was performed. Measured
wall-clock latencies are reported separately in PipelineStats, which carries
no cross-run determinism promise.

Feedback timing is likewise plan-derived: the message aggregating the window
that ends at frame w becomes visible to the sender right after the received
index that completes w's cohort, so the sender applies it at the same frame
position in both execution modes.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from queue import Queue
from typing import Callable, List, NamedTuple, Optional, Tuple

from .analyzer import (
    AnalyzerReport,
    FeedbackMessage,
    FeedbackPolicy,
    build_report,
    build_report_noref,
    make_feedback,
)
from .channel import SenderConfig, add_gaussian_noise, encode_decode, sender_step, transmit
from .config import PipelineConfig, fresh_loss_model
from .detector import (
    ForkDecision,
    NoiseCategory,
    NoiseEstimate,
    Route,
    analyze_frame,
    estimate_sigma,
    fork_decision,
    median_filter_3x3,
)
from .frame import Frame, VideoSequence
from .image_denoiser import PASSTHROUGH_SIGMA, denoise_keyframe
from .metrics import detail_retention
from .rng import NoiseRng
from .video_denoiser import BlockMode, FrameRole, WindowPlan, denoise_window, schedule_windows

QUEUE_CAPACITY = 8
_CAPTURE_STREAM = 1  # rng substream tags under the pipeline seed
_LOSS_STREAM = 2

# Modeled per-pixel work costs (nanoseconds) for the deterministic runtime
# carried by reports; see the module docstring.
_NS_DETECT = 15.0
_NS_MEDIAN = 30.0
_NS_BILATERAL_TAP = 2.0
_NS_GAUSSIAN_TAP = 1.0
_NS_FUSE = 10.0
_NS_TEMPORAL_BLOCK = 8.0
_NS_CONV_MAC = 1.0
_CONV_MACS_PER_PX = 4 * 16 * 9 + 16 * 16 * 9 + 16 * 1 * 9


def _virtual_image_ms(pixels: int, sigma_work: float, config: PipelineConfig) -> float:
    cascade = config.cascade
    taps = 2 * max(1, int(3.0 * cascade.gaussian_sigma(sigma_work) + 0.999)) + 1
    per_px = (
        (2 * cascade.window_radius + 1) ** 2 * _NS_BILATERAL_TAP
        + 2 * taps * _NS_GAUSSIAN_TAP
        + _NS_FUSE
    )
    return pixels * per_px * 1e-6


def _virtual_window_ms(pixels: int, sigma: float, config: PipelineConfig) -> float:
    block = config.block
    if block.mode is BlockMode.CONV:
        per_px = _CONV_MACS_PER_PX * _NS_CONV_MAC
    else:
        per_px = _NS_TEMPORAL_BLOCK
        if block.spatial_enabled and sigma >= PASSTHROUGH_SIGMA:
            per_px += 9 * _NS_BILATERAL_TAP
    return 4 * pixels * per_px * 1e-6


@dataclass(frozen=True)
class PipelineStats:
    """Measured accounting for one run; no cross-run determinism promise."""

    frame_count: int
    frames_bypassed: int
    frames_denoised: int
    detect_ms: tuple
    image_denoise_ms: tuple
    video_denoise_ms: tuple
    analyze_ms: tuple
    mean_latency_ms: float
    p95_latency_ms: float
    achieved_fps: float
    wall_ms: float

    def to_json_dict(self) -> dict:
        return {
            "frame_count": self.frame_count,
            "frames_bypassed": self.frames_bypassed,
            "frames_denoised": self.frames_denoised,
            "detect_ms": list(self.detect_ms),
            "image_denoise_ms": list(self.image_denoise_ms),
            "video_denoise_ms": list(self.video_denoise_ms),
            "analyze_ms": list(self.analyze_ms),
            "mean_latency_ms": self.mean_latency_ms,
            "p95_latency_ms": self.p95_latency_ms,
            "achieved_fps": self.achieved_fps,
            "wall_ms": self.wall_ms,
        }


@dataclass(frozen=True)
class SenderTraceEntry:
    frame_index: int
    q: int
    resolution_scale: Fraction
    framerate_divisor: int

    def to_json_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "q": self.q,
            "resolution_scale": float(self.resolution_scale),
            "framerate_divisor": self.framerate_divisor,
        }


class SimulationResult(NamedTuple):
    received: VideoSequence
    denoised: VideoSequence
    reports: List[AnalyzerReport]
    feedback_log: List[FeedbackMessage]
    sender_trace: List[SenderTraceEntry]
    stats: PipelineStats


@dataclass(frozen=True)
class _KeyframeRecord:
    index: int
    decision: ForkDecision
    sigma_work: float        # post-prefilter sigma driving the filters
    output: Frame
    detect_ms: float         # measured
    image_ms: Optional[float]
    virtual_ms: float        # modeled runtime for the report


@dataclass(frozen=True)
class _Emitted:
    index: int
    received: Frame
    output: Frame
    keyframe: _KeyframeRecord  # cohort's keyframe record
    is_keyframe: bool
    video_ms: Optional[float]  # measured, temporal DENOISE frames only
    virtual_ms: float
    span_ms: float             # wall time attributable to this frame so far


def _cohort_end(start: int, cadence: int, n: int) -> int:
    return min(start + cadence, n) - 1


def _cohort_ready_at(start: int, cadence: int, n: int) -> int:
    return min(_cohort_end(start, cadence, n) + 2, n - 1)


def _feedback_apply_points(n: int, cadence: int, window: int) -> List[int]:
    """Sender frame index at which each feedback window's message applies."""
    if window <= 0:
        return []
    points = []
    for w_end in range(window - 1, n, window):
        cohort_start = (w_end // cadence) * cadence
        points.append(_cohort_ready_at(cohort_start, cadence, n) + 1)
    return points


class _KeyframeStage:
    """Detect noise on a keyframe, fork, and (on DENOISE) run the cascade."""

    def __init__(self, config: PipelineConfig):
        self._config = config

    def process(self, index: int, frame: Frame) -> _KeyframeRecord:
        config = self._config
        t0 = time.perf_counter()
        estimate = analyze_frame(frame)
        work = frame
        sigma_work = estimate.sigma
        prefiltered = estimate.category is NoiseCategory.SALT_PEPPER
        if prefiltered:
            work = median_filter_3x3(frame)
            sigma_work = estimate_sigma(work)
        decision = fork_decision(estimate, config.threshold)
        t1 = time.perf_counter()

        pixels = frame.width * frame.height
        virtual = pixels * _NS_DETECT * 1e-6
        if prefiltered:
            virtual += pixels * _NS_MEDIAN * 1e-6
        image_ms = None
        if decision.route is Route.DENOISE:
            output = denoise_keyframe(work, sigma_work, config.cascade)
            image_ms = (time.perf_counter() - t1) * 1e3
            if sigma_work >= PASSTHROUGH_SIGMA:
                virtual += _virtual_image_ms(pixels, sigma_work, config)
        else:
            output = frame  # bypass: bit-identical passthrough
        return _KeyframeRecord(
            index=index,
            decision=decision,
            sigma_work=sigma_work,
            output=output,
            detect_ms=(t1 - t0) * 1e3,
            image_ms=image_ms,
            virtual_ms=virtual,
        )


class _AssembleStage:
    """Buffer received frames, complete cohorts in order, emit output frames."""

    def __init__(self, config: PipelineConfig, n_frames: int, plan: WindowPlan):
        self._config = config
        self._n = n_frames
        self._plan = plan
        self._received: dict = {}
        self._records: dict = {}
        self._emit_next = 0  # next cohort start to emit

    def push(self, index: int, frame: Frame, record: Optional[_KeyframeRecord]) -> List[_Emitted]:
        self._received[index] = frame
        if record is not None:
            self._records[index] = record
        emitted: List[_Emitted] = []
        while (
            self._emit_next < self._n
            and index >= _cohort_ready_at(self._emit_next, self._config.cadence, self._n)
        ):
            emitted.extend(self._emit_cohort(self._emit_next))
            self._emit_next += self._config.cadence
        if self._emit_next >= self._n:
            # all cohorts emitted; buffers are no longer needed
            self._received.clear()
        return emitted

    def _window_source(self, idx: int) -> Frame:
        record = self._records.get(idx)
        return record.output if record is not None else self._received[idx]

    def _emit_cohort(self, start: int) -> List[_Emitted]:
        config = self._config
        end = _cohort_end(start, config.cadence, self._n)
        record = self._records[start]
        denoise = record.decision.route is Route.DENOISE
        out: List[_Emitted] = []
        for t in range(start, end + 1):
            t0 = time.perf_counter()
            received = self._received[t]
            video_ms = None
            if t == start:
                output = record.output
                virtual = record.virtual_ms
            elif denoise:
                window = [self._window_source(i) for i in self._plan.window(t)]
                v0 = time.perf_counter()
                output = denoise_window(window, record.sigma_work, config.block)
                video_ms = (time.perf_counter() - v0) * 1e3
                virtual = _virtual_window_ms(received.width * received.height,
                                             record.sigma_work, config)
            else:
                output = received
                virtual = 0.0
            out.append(
                _Emitted(
                    index=t,
                    received=received,
                    output=output,
                    keyframe=record,
                    is_keyframe=t == start,
                    video_ms=video_ms,
                    virtual_ms=virtual,
                    span_ms=(time.perf_counter() - t0) * 1e3,
                )
            )
        return out


class _AnalyzeStage:
    """Build per-frame reports and window feedback; owns result accumulation."""

    def __init__(self, config: PipelineConfig, reference: Optional[VideoSequence]):
        self._config = config
        self._reference = reference
        self._policy = FeedbackPolicy(
            sigma_threshold=config.threshold,
            budget_ms=config.budget_ms,
            window=max(config.feedback_window, 1),
        )
        self.reports: List[AnalyzerReport] = []
        self.feedback_log: List[FeedbackMessage] = []
        self.analyze_ms: dict = {}

    def push(self, item: _Emitted) -> Optional[FeedbackMessage]:
        config = self._config
        record = item.keyframe
        t0 = time.perf_counter()
        if self._reference is not None:
            report = build_report(
                frame_index=item.index,
                reference=self._reference[item.index],
                noisy=item.received,
                denoised=item.output,
                sigma=record.decision.estimate.sigma,
                runtime_ms=item.virtual_ms,
                budget_ms=config.budget_ms,
                weights=config.analyzer_weights,
            )
        elif record.decision.route is Route.DENOISE:
            report = build_report_noref(
                frame_index=item.index,
                noisy=item.received,
                denoised=item.output,
                sigma_before=record.decision.estimate.sigma,
                sigma_after=estimate_sigma(item.output),
                runtime_ms=item.virtual_ms,
                budget_ms=config.budget_ms,
                weights=config.analyzer_weights,
            )
        else:
            # bypass: no work performed, so no improvement is claimed; the
            # values below are what build_report_noref would compute for an
            # untouched frame, skipping the redundant metric evaluation
            report = AnalyzerReport(
                frame_index=item.index,
                reference_mode="noref",
                psnr_noisy=None, psnr_denoised=None,
                ssim_noisy=None, ssim_denoised=None,
                ms_ssim_noisy=None, ms_ssim_denoised=None,
                vifp_noisy=None, vifp_denoised=None,
                detail_retention=1.0,
                delta_psnr=None, delta_ssim=None, delta_sigma=0.0,
                sigma=record.decision.estimate.sigma,
                runtime_ms=0.0,
                score=0.0,
            )
        self.reports.append(report)
        self.analyze_ms[item.index] = (time.perf_counter() - t0) * 1e3

        window = self._config.feedback_window
        if window > 0 and self._reference is not None and len(self.reports) % window == 0:
            message = make_feedback(self.reports[-window:], self._policy)
            self.feedback_log.append(message)
            return message
        return None


class _Sender:
    """Simulated sender: capture noise, codec, channel, feedback application."""

    def __init__(self, clean: VideoSequence, config: PipelineConfig):
        self._clean = clean
        self._capture = NoiseRng(config.seed).derive(_CAPTURE_STREAM)
        self._noise_sigma = config.sender.noise_sigma
        self.config: SenderConfig = config.sender
        self.loss = fresh_loss_model(config)
        self._next_encode_at = 0
        self._prev: Optional[Frame] = None
        self.trace: List[SenderTraceEntry] = [self._entry(0)]

    def _entry(self, index: int) -> SenderTraceEntry:
        return SenderTraceEntry(
            frame_index=index,
            q=self.config.q,
            resolution_scale=self.config.resolution_scale,
            framerate_divisor=self.config.framerate_divisor,
        )

    def apply(self, message: FeedbackMessage, at_index: int) -> None:
        updated = sender_step(self.config, message)
        if updated != self.config:
            self.config = updated
            self.trace.append(self._entry(at_index))

    def produce(self, index: int) -> Frame:
        if index >= self._next_encode_at:
            frame = self._clean[index]
            if self._noise_sigma > 0:
                seed = int(self._capture.derive(index).seed)
                frame = add_gaussian_noise(frame, self._noise_sigma, seed=seed)
            encoded = encode_decode(frame, self.config)
            received, _ = transmit(encoded, self._prev, self.loss)
            self._next_encode_at = index + self.config.framerate_divisor
        else:
            received = self._prev  # frame dropped by the sender; repeat last
        self._prev = received
        return received


class _RunAccumulator:
    def __init__(self, n: int):
        self.n = n
        self.outputs: List[Optional[Frame]] = [None] * n
        self.latency_ms: List[float] = [0.0] * n
        self.detect_ms: List[float] = []
        self.image_ms: List[float] = []
        self.video_ms: List[float] = []
        self.bypassed = 0
        self.denoised = 0

    def arrival(self, record: _KeyframeRecord, span_ms: float) -> None:
        self.detect_ms.append(record.detect_ms)
        if record.image_ms is not None:
            self.image_ms.append(record.image_ms)
        self.latency_ms[record.index] += span_ms

    def emitted(self, item: _Emitted) -> None:
        self.outputs[item.index] = item.output
        self.latency_ms[item.index] += item.span_ms
        if item.video_ms is not None:
            self.video_ms.append(item.video_ms)
        if item.keyframe.decision.route is Route.DENOISE:
            self.denoised += 1
        else:
            self.bypassed += 1

    def finish(self, analyze_ms: dict, wall_ms: float) -> PipelineStats:
        for index, ms in analyze_ms.items():
            self.latency_ms[index] += ms
        ordered = sorted(self.latency_ms)
        p95 = ordered[max(0, -(-len(ordered) * 95 // 100) - 1)] if ordered else 0.0
        mean = sum(ordered) / len(ordered) if ordered else 0.0
        return PipelineStats(
            frame_count=self.n,
            frames_bypassed=self.bypassed,
            frames_denoised=self.denoised,
            detect_ms=tuple(self.detect_ms),
            image_denoise_ms=tuple(self.image_ms),
            video_denoise_ms=tuple(self.video_ms),
            analyze_ms=tuple(analyze_ms[i] for i in sorted(analyze_ms)),
            mean_latency_ms=mean,
            p95_latency_ms=p95,
            achieved_fps=self.n / (wall_ms / 1e3) if wall_ms > 0 else 0.0,
            wall_ms=wall_ms,
        )


def _execute(
    config: PipelineConfig,
    n: int,
    frame_rate: Fraction,
    produce: Callable[[int], Frame],
    reference: Optional[VideoSequence],
    on_feedback: Optional[Callable[[FeedbackMessage, int], None]],
) -> Tuple[List[Frame], _AnalyzeStage, PipelineStats]:
    """Drive the three stages over n frames in the configured execution mode.

    on_feedback, when given, is invoked with (message, apply_index) at the
    plan-derived apply point, before frame apply_index is produced.
    """
    plan = schedule_windows(n, config.cadence)
    keyframe_stage = _KeyframeStage(config)
    assemble = _AssembleStage(config, n, plan)
    analyze = _AnalyzeStage(config, reference)
    acc = _RunAccumulator(n)
    apply_points = _feedback_apply_points(n, config.cadence, config.feedback_window)
    if reference is None or on_feedback is None:
        apply_points = []
    wall_start = time.perf_counter()

    if config.execution == "sequential":
        pending: List[FeedbackMessage] = []
        applied = 0
        for t in range(n):
            while applied < len(apply_points) and apply_points[applied] <= t:
                on_feedback(pending[applied], t)
                applied += 1
            frame = produce(t)
            record = None
            if plan.role(t) is FrameRole.KEYFRAME:
                t0 = time.perf_counter()
                record = keyframe_stage.process(t, frame)
                acc.arrival(record, (time.perf_counter() - t0) * 1e3)
            for item in assemble.push(t, frame, record):
                acc.emitted(item)
                message = analyze.push(item)
                if message is not None:
                    pending.append(message)
    else:
        q_in: Queue = Queue(maxsize=QUEUE_CAPACITY)
        q_mid: Queue = Queue(maxsize=QUEUE_CAPACITY)
        q_emit: Queue = Queue(maxsize=QUEUE_CAPACITY)
        feedback_q: Queue = Queue()
        failures: List[BaseException] = []

        def detect_worker():
            try:
                while True:
                    got = q_in.get()
                    if got is None:
                        q_mid.put(None)
                        return
                    t, frame = got
                    record = None
                    if plan.role(t) is FrameRole.KEYFRAME:
                        t0 = time.perf_counter()
                        record = keyframe_stage.process(t, frame)
                        acc.arrival(record, (time.perf_counter() - t0) * 1e3)
                    q_mid.put((t, frame, record))
            except BaseException as exc:  # propagate to the main thread
                failures.append(exc)
                q_mid.put(None)

        def assemble_worker():
            try:
                while True:
                    got = q_mid.get()
                    if got is None:
                        q_emit.put(None)
                        return
                    for item in assemble.push(*got):
                        q_emit.put(item)
            except BaseException as exc:
                failures.append(exc)
                q_emit.put(None)

        def analyze_worker():
            try:
                while True:
                    item = q_emit.get()
                    if item is None:
                        feedback_q.put(None)
                        return
                    acc.emitted(item)
                    message = analyze.push(item)
                    if message is not None:
                        feedback_q.put(message)
            except BaseException as exc:
                failures.append(exc)
                feedback_q.put(None)

        threads = [
            threading.Thread(target=worker, name=name, daemon=True)
            for name, worker in (
                ("detect", detect_worker),
                ("assemble", assemble_worker),
                ("analyze", analyze_worker),
            )
        ]
        for thread in threads:
            thread.start()
        applied = 0
        ended_early = False
        for t in range(n):
            while applied < len(apply_points) and apply_points[applied] <= t:
                message = feedback_q.get()
                if message is None:  # a stage died; stop feeding
                    ended_early = True
                    break
                on_feedback(message, t)
                applied += 1
            if ended_early:
                break
            q_in.put((t, produce(t)))
        q_in.put(None)
        for thread in threads:
            thread.join()
        if failures:
            raise failures[0]

    wall_ms = (time.perf_counter() - wall_start) * 1e3
    missing = [i for i, f in enumerate(acc.outputs) if f is None]
    if missing:
        raise RuntimeError(f"pipeline failed to emit frames {missing[:5]}")
    stats = acc.finish(analyze.analyze_ms, wall_ms)
    return acc.outputs, analyze, stats


def run_denoise(
    video: VideoSequence,
    config: PipelineConfig = PipelineConfig(),
) -> Tuple[VideoSequence, List[AnalyzerReport], PipelineStats]:
    """Receiver-only pipeline: detect, fork, denoise. Reports are no-reference."""
    if len(video) == 0:
        raise ValueError("input sequence is empty")
    outputs, analyze, stats = _execute(
        config=config,
        n=len(video),
        frame_rate=video.frame_rate,
        produce=lambda t: video[t],
        reference=None,
        on_feedback=None,
    )
    return video.replace_frames(outputs), analyze.reports, stats


def run_simulate(
    clean: VideoSequence,
    config: PipelineConfig = PipelineConfig(),
) -> SimulationResult:
    """Closed loop: sender/codec/channel, receiver pipeline, analyzer feedback."""
    if len(clean) == 0:
        raise ValueError("input sequence is empty")
    sender = _Sender(clean, config)
    received: List[Frame] = []

    def produce(t: int) -> Frame:
        frame = sender.produce(t)
        received.append(frame)
        return frame

    outputs, analyze, stats = _execute(
        config=config,
        n=len(clean),
        frame_rate=clean.frame_rate,
        produce=produce,
        reference=clean,
        on_feedback=sender.apply,
    )
    return SimulationResult(
        received=clean.replace_frames(received),
        denoised=clean.replace_frames(outputs),
        reports=analyze.reports,
        feedback_log=analyze.feedback_log,
        sender_trace=sender.trace,
        stats=stats,
    )
