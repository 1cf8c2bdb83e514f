// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "seamless/app.hpp"
#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"
#include "seamless/tensor.hpp"

namespace fs = std::filesystem;
using namespace seamless;

namespace {

// Pinned tolerances.
constexpr double kAcGradTol = 1e-4;
constexpr double kPcGradTol = 1e-3;
constexpr double kLossSuiteSeconds = 60.0;
constexpr double kChainTol = 1e-5;
constexpr double kMcVarianceTol = 0.05;
constexpr int kMcDraws = 10000;
constexpr double kDiffusionSuiteSeconds = 120.0;
constexpr int kMaskDraws = 1000;
constexpr double kMaskRate = 0.8;
constexpr double kMaskLow = 0.78, kMaskHigh = 0.82;
constexpr int kOverfitUtterances = 10;
constexpr int kOverfitSteps = 20000;
constexpr int kLossWindow = 1000;
constexpr int kProbeEvery = 100;
constexpr std::uint64_t kProbeDraws = 4;
constexpr double kOverfitMcd = 1.5;
constexpr double kOffsetMcdTol = 1e-9;
constexpr double kStoiSelf = 0.999;
constexpr double kSmokeCpuSeconds = 20.0 * 60.0;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& text) { notes.push_back(text); }
};

template <typename... Args>
std::string str(const Args&... args) {
  std::ostringstream os;
  os << std::setprecision(6);
  (os << ... << args);
  return os.str();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

bool same_bits(float a, float b) { return std::memcmp(&a, &b, sizeof(float)) == 0; }

FeatureConfig test_features() {
  FeatureConfig f;
  f.num_mels = 8;
  return f;
}

GstConfig tiny_gst() {
  GstConfig g;
  g.num_mels = 8;
  g.conv_channels = {8, 16};
  g.gru_units = 16;
  g.num_tokens = 6;
  g.num_heads = 2;
  g.embedding_dim = 16;
  return g;
}

RunConfig profile(const fs::path& source_dir, const fs::path& work) {
  auto c = load_run_config(source_dir / "configs" / "test.json");
  c.paths.corpus_dir = (work / "corpus").string();
  c.paths.manifest_dir = (work / "manifest").string();
  c.paths.output_dir = (work / "out").string();
  c.paths.lexicon.clear();
  return c;
}

// ---- 1 ----------------------------------------------------------------------

Outcome loss_suite() {
  Outcome out;
  const double start = cpu_seconds();
  Rng rng(101);

  double worst_ac = 0.0;
  bool zero_ok = true, nonneg_ok = true, additive_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    auto gt = normal_tensor(rng, {40, 8}, torch::kFloat64);
    const MaskSpec spec{{{3, 11, 0, 0}, {18, 26, 1, 1}, {30, 40, 2, 2}}, 0.6};
    std::vector<torch::Tensor> exact, preds;
    double sum = 0.0;
    for (const auto& r : spec.regions) {
      exact.push_back(gt.slice(0, static_cast<long>(r.start_frame), static_cast<long>(r.end_frame)));
      preds.push_back(normal_tensor(rng, {static_cast<long>(r.length()), 8}, torch::kFloat64));
      const double single = acoustic_consistency_loss(preds.back(), gt, r).item<double>();
      nonneg_ok = nonneg_ok && single >= 0.0;
      sum += single;
    }
    zero_ok = zero_ok && acoustic_consistency_loss(exact, gt, spec).item<double>() == 0.0;
    const double total = acoustic_consistency_loss(preds, gt, spec).item<double>();
    additive_ok = additive_ok && std::abs(total - sum) <= 1e-12 * std::max(1.0, sum);
  }
  out.check(zero_ok, "L_AC == 0 on exact matches");
  out.check(nonneg_ok, "L_AC >= 0");
  out.check(additive_ok, "L_AC per-region additivity");

  for (auto statistic : {SmoothnessStatistic::Variance, SmoothnessStatistic::AdjacentEuclidean}) {
    auto gt = normal_tensor(rng, {16, 8}, torch::kFloat64);
    const MaskRegion region{4, 10, 0, 0};
    auto pred = normal_tensor(rng, {6, 8}, torch::kFloat64).requires_grad_(true);
    acoustic_consistency_loss(pred, gt, region, statistic).backward();
    const auto grad = pred.grad();
    for (long row = 0; row < 6; ++row) {
      for (long m = 0; m < 8; ++m) {
        const double eps = 1e-6;
        auto bump = [&](double delta) {
          torch::NoGradGuard no_grad;
          auto p = pred.detach().clone();
          p[row][m] += delta;
          return acoustic_consistency_loss(p, gt, region, statistic).item<double>();
        };
        const double numeric = (bump(eps) - bump(-eps)) / (2 * eps);
        const double analytic = grad[row][m].item<double>();
        if (numeric == 0.0 && analytic == 0.0) continue;
        worst_ac = std::max(worst_ac, rel_err(numeric, analytic));
      }
    }
  }
  out.check(worst_ac < kAcGradTol, str("L_AC gradient rel. err ", worst_ac));

  torch::manual_seed(7);
  Gst gst(tiny_gst());
  gst->set_trained(true);
  gst->freeze();
  gst->to(torch::kFloat64);
  bool pc_zero = true, pc_nonneg = true, pc_additive = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto full = normal_tensor(rng, {60, 8}, torch::kFloat64);
    auto region = full.slice(0, 10, 30);
    torch::NoGradGuard no_grad;
    const auto target = gst_encode(gst, full);
    pc_zero = pc_zero && prosody_consistency_loss(gst, full, target).item<double>() == 0.0;
    pc_nonneg = pc_nonneg && prosody_consistency_loss(gst, region, target).item<double>() >= 0.0;
    // Batched encoding (as used in training) sums to the per-region losses.
    std::vector<torch::Tensor> regions{full.slice(0, 0, 12), full.slice(0, 20, 45), full.slice(0, 50, 60)};
    const auto batched = gst_encode_many(gst, regions);
    double singles = 0.0, together = 0.0;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      singles += prosody_consistency_loss(gst, regions[i], target).item<double>();
      together += (batched[static_cast<long>(i)] - target).pow(2).mean().item<double>();
    }
    pc_additive = pc_additive && std::abs(singles - together) <= 1e-9 * std::max(1.0, singles);
  }
  out.check(pc_zero, "L_PC == 0 on exact matches");
  out.check(pc_nonneg, "L_PC >= 0");
  out.check(pc_additive, "L_PC per-region additivity");

  auto full = normal_tensor(rng, {50, 8}, torch::kFloat64);
  auto pred = normal_tensor(rng, {12, 8}, torch::kFloat64).requires_grad_(true);
  prosody_consistency_loss_from_mel(gst, pred, full).backward();
  const auto grad = pred.grad();
  double worst_pc = 0.0;
  for (long row = 0; row < 12; ++row) {
    for (long m = 0; m < 8; ++m) {
      const double eps = 1e-6;
      auto bump = [&](double delta) {
        torch::NoGradGuard no_grad;
        auto p = pred.detach().clone();
        p[row][m] += delta;
        return prosody_consistency_loss_from_mel(gst, p, full).item<double>();
      };
      const double numeric = (bump(eps) - bump(-eps)) / (2 * eps);
      const double analytic = grad[row][m].item<double>();
      if (std::abs(numeric) < 1e-10 && std::abs(analytic) < 1e-10) continue;
      worst_pc = std::max(worst_pc, rel_err(numeric, analytic));
    }
  }
  out.check(worst_pc < kPcGradTol, str("L_PC gradient rel. err ", worst_pc));

  const double elapsed = cpu_seconds() - start;
  out.check(elapsed < kLossSuiteSeconds, str("runtime ", elapsed, " s"));
  out.note(str("AC grad err ", worst_ac, ", PC grad err ", worst_pc, ", ", elapsed, " s"));
  return out;
}

// ---- 2 ----------------------------------------------------------------------

Outcome diffusion_suite() {
  Outcome out;
  const double start = cpu_seconds();
  const auto s = make_schedule(8, ScheduleKind::Linear, 1e-4, 0.7);

  // q(y_t | y_0) = N(sqrt(ab) y0, (1 - ab) I).
  Rng rng(5);
  auto y0 = normal_tensor(rng, {4, 8}, torch::kFloat64);
  double worst_closed = 0.0;
  for (int t = 0; t < s.steps; ++t) {
    auto noise = normal_tensor(rng, {4, 8}, torch::kFloat64);
    const auto expected = std::sqrt(s.alpha_bar[t]) * y0 + std::sqrt(1.0 - s.alpha_bar[t]) * noise;
    worst_closed = std::max(worst_closed, (forward_diffuse(y0, t, noise, s) - expected).abs().max().item<double>());
  }
  out.check(worst_closed < 1e-12, str("closed-form forward sample error ", worst_closed));
  {
    const int t = 5;
    auto point = torch::full({kMcDraws, 1}, 1.3, torch::kFloat64);
    auto samples = forward_diffuse(point, t, normal_tensor(rng, {kMcDraws, 1}, torch::kFloat64), s);
    const double mean = samples.mean().item<double>();
    const double var = samples.var(false).item<double>();
    const double want_mean = 1.3 * std::sqrt(s.alpha_bar[t]);
    const double want_var = 1.0 - s.alpha_bar[t];
    out.check(std::abs(mean - want_mean) < 4.0 * std::sqrt(want_var / kMcDraws), str("q(y_t|y_0) mean ", mean));
    out.check(std::abs(var / want_var - 1.0) < kMcVarianceTol, str("q(y_t|y_0) variance ratio ", var / want_var));
  }

  // Oracle denoiser recovers y0 through the masked reverse chain.
  auto truth = normal_tensor(rng, {60, 8}, torch::kFloat32);
  DenoiseFn oracle = [&](const torch::Tensor&, int) { return truth; };
  const MaskSpec spec{{{5, 20, 1, 2}, {33, 58, 4, 6}}, 0.8};
  auto context = truth.clone();
  for (const auto& r : spec.regions) context.slice(0, static_cast<long>(r.start_frame), static_cast<long>(r.end_frame)).zero_();
  Rng chain_rng(9);
  const auto regions = generate_regions(context, spec, s, oracle, chain_rng);
  double chain_err = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = spec.regions[i];
    chain_err = std::max(chain_err, (regions[i] - truth.slice(0, static_cast<long>(r.start_frame),
                                                                static_cast<long>(r.end_frame)))
                                        .abs()
                                        .max()
                                        .item<double>());
  }
  out.check(regions.size() == 2 && chain_err <= kChainTol, str("oracle chain error ", chain_err));

  // Posterior sampling variance.
  double worst_var = 0.0;
  for (int t = 1; t < s.steps; ++t) {
    auto zero = torch::zeros({kMcDraws}, torch::kFloat64);
    auto draws = posterior_sample(zero, zero, t, s, normal_tensor(rng, {kMcDraws}, torch::kFloat64));
    const double ratio = draws.var(false).item<double>() / s.posterior_variance[t];
    worst_var = std::max(worst_var, std::abs(ratio - 1.0));
  }
  out.check(worst_var < kMcVarianceTol, str("posterior variance deviation ", worst_var));

  const double elapsed = cpu_seconds() - start;
  out.check(elapsed < kDiffusionSuiteSeconds, str("runtime ", elapsed, " s"));
  out.note(str("chain err ", chain_err, ", posterior var dev ", worst_var, ", ", elapsed, " s"));
  return out;
}

// ---- 3 ----------------------------------------------------------------------

Outcome masking_suite() {
  Outcome out;
  const auto corpus = synth_corpus(20, 31, test_features());
  std::size_t aligned = 0, regions = 0, context_bad = 0;
  double fraction_sum = 0.0;
  for (int draw = 0; draw < kMaskDraws; ++draw) {
    const auto& u = corpus.entries[static_cast<std::size_t>(draw) % corpus.entries.size()];
    Rng rng(static_cast<std::uint64_t>(draw) + 1);
    const auto spec = sample_mask_spans(u, kMaskRate, rng);
    fraction_sum += static_cast<double>(spec.masked_frames()) / static_cast<double>(u.mel.num_frames());
    const auto offsets = u.phone_offsets();
    for (const auto& r : spec.regions) {
      ++regions;
      if (r.start_frame == offsets[r.first_phone] && r.end_frame == offsets[r.last_phone + 1]) ++aligned;
    }
    if (spec.regions.empty()) continue;
    const auto masked = apply_mask(u.mel, spec, rng);
    const auto flags = spec.frame_flags(u.mel.num_frames());
    for (std::size_t f = 0; f < flags.size(); ++f) {
      if (flags[f]) continue;
      for (std::size_t m = 0; m < u.mel.num_mels(); ++m) context_bad += !same_bits(masked.at(f, m), u.mel.at(f, m));
    }
  }
  const double mean = fraction_sum / kMaskDraws;
  out.check(mean >= kMaskLow && mean <= kMaskHigh, str("mean masked fraction ", mean));
  out.check(aligned == regions, str(aligned, "/", regions, " regions phoneme-aligned"));
  out.check(context_bad == 0, str(context_bad, " context values changed"));
  out.note(str("mean fraction ", mean, ", ", regions, " regions aligned, context bit-preserved"));
  return out;
}

// ---- 4 / 7 shared overfit run ----------------------------------------------

struct OverfitRun {
  RunConfig config;
  std::vector<double> totals;
  // Fixed-draw probes of the total loss, every kProbeEvery steps.
  std::vector<double> probes;
  bool ok = false;
  std::string error;
};

OverfitRun& overfit(const fs::path& source_dir, const fs::path& work) {
  static OverfitRun run;
  static bool done = false;
  if (done) return run;
  done = true;
  run.config = profile(source_dir, work / "overfit");
  run.config.synth.utterances = kOverfitUtterances;
  run.config.train.steps = kOverfitSteps;
  run.config.train.log_every = 500;
  run.config.eval.split = "train";
  run.config.eval.score_audio = false;
  run.config.eval.predicted_pitch = false;
  try {
    run_synthset(run.config);
    run_pretrain_gst(run.config);
    const auto manifest = load_prepared_manifest(run.config);
    const auto items = manifest.subset(Split::Train);
    run.totals.reserve(kOverfitSteps);
    run_train(
        run.config,
        [&](int step, const LossBreakdown& losses, double) {
          run.totals.push_back(losses.total);
          if (step % 1000 == 0) log::info("overfit step ", step, " total ", losses.total);
        },
        [&](int step, Trainer& trainer) {
          if (step % kProbeEvery != 0) return;
          double sum = 0.0;
          for (std::uint64_t seed = 1; seed <= kProbeDraws; ++seed) sum += trainer.probe(items, seed).total;
          run.probes.push_back(sum / kProbeDraws);
        });
    run.ok = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

Outcome overfit_suite(const fs::path& source_dir, const fs::path& work) {
  Outcome out;
  auto& run = overfit(source_dir, work);
  if (!run.ok) {
    out.check(false, "training: " + run.error);
    return out;
  }
  std::string trace;
  for (std::size_t begin = 0; begin + kLossWindow <= run.totals.size(); begin += kLossWindow) {
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + kLossWindow; ++i) sum += run.totals[i];
    trace += (begin ? " " : "") + str(std::setprecision(4), sum / kLossWindow);
  }
  constexpr std::size_t per_window = kLossWindow / kProbeEvery;
  std::vector<double> smoothed;
  for (std::size_t begin = 0; begin + per_window <= run.probes.size(); begin += per_window) {
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + per_window; ++i) sum += run.probes[i];
    smoothed.push_back(sum / per_window);
  }
  bool decreasing = smoothed.size() >= 2;
  std::string probes;
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    probes += (i ? " " : "") + str(std::setprecision(4), smoothed[i]);
    if (i > 0 && !(smoothed[i] < smoothed[i - 1])) decreasing = false;
  }
  out.check(decreasing, "probe loss not strictly decreasing: " + probes);

  const auto report = run_evaluate(run.config);
  const double m = report.mcd().mean.value_or(INFINITY);
  out.check(m <= kOverfitMcd, str("masked MCD ", m, " dB"));
  const auto oracle = run_evaluate(run.config, true);
  const double om = oracle.mcd().mean.value_or(INFINITY);
  out.check(om == 0.0, str("oracle MCD ", om));
  // Edit-time setting, reported only: pitch inside regions from the predictor.
  auto edit_like = run.config;
  edit_like.eval.predicted_pitch = true;
  const double pm = run_evaluate(edit_like).mcd().mean.value_or(INFINITY);
  out.note(str(kOverfitSteps, " steps on ", kOverfitUtterances, " utterances; mean probe loss per window [", probes,
               "]; training-batch window means [", trace, "]; masked MCD ", m, " dB (", pm, " dB with predicted pitch); oracle MCD ", om));
  return out;
}

// ---- 5 ----------------------------------------------------------------------

Outcome ablation_suite(const fs::path& source_dir, const fs::path& work) {
  Outcome out;
  auto config = profile(source_dir, work / "ablate");
  config.synth.utterances = 6;
  config.train.steps = 20;
  config.gst_train.steps = 100;
  config.eval.split = "train";
  config.eval.score_audio = false;
  run_synthset(config);
  run_pretrain_gst(config);
  const auto table = run_ablate(config);
  out.check(table.rows.size() == 3, str(table.rows.size(), " rows"));
  const std::vector<std::string> labels{"full", "w/o L_AC", "w/o L_PC"};
  for (std::size_t i = 0; i < std::min<std::size_t>(3, table.rows.size()); ++i) {
    out.check(table.rows[i].label == labels[i], "row " + std::to_string(i) + " label " + table.rows[i].label);
    out.check(table.rows[i].mcd().mean.has_value(), "row " + labels[i] + " has an MCD");
  }
  out.check(fs::exists(fs::path(config.paths.output_dir) / "ablation.txt"), "ablation.txt written");

  // Gradients with both consistency losses disabled vs a pure reconstruction step.
  const auto manifest = load_prepared_manifest(config);
  std::vector<const AlignedUtterance*> items;
  for (const auto& e : manifest.entries) items.push_back(&e);
  auto make = [&] {
    torch::manual_seed(3);
    return make_model(config.model, manifest);
  };
  auto ablated_model = make();
  auto reference_model = make();
  auto off = config.train;
  off.loss.w_ac = 0.0;
  off.loss.w_pc = 0.0;
  Trainer ablated(ablated_model, Gst{nullptr}, make_schedule(config.schedule), off);
  Trainer reference(reference_model, load_gst(RunPaths(config).gst_checkpoint), make_schedule(config.schedule),
                    config.train);
  Rng ra(44), rb(44);
  ablated.zero_grad();
  reference.zero_grad();
  ablated.compute_gradients(items, ra);
  reference.compute_reconstruction_gradients(items, rb);
  const auto pa = ablated_model->parameters();
  const auto pb = reference_model->parameters();
  std::size_t identical = 0, compared = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!pa[i].grad().defined() || !pb[i].grad().defined()) {
      identical += pa[i].grad().defined() == pb[i].grad().defined();
      ++compared;
      continue;
    }
    ++compared;
    identical += torch::equal(pa[i].grad(), pb[i].grad());
  }
  out.check(compared > 0 && identical == compared, str(identical, "/", compared, " gradient tensors bit-identical"));
  out.note(str("rows: full / w/o L_AC / w/o L_PC; ", identical, "/", compared, " gradients bit-identical"));
  return out;
}

// ---- 6 ----------------------------------------------------------------------

Outcome metric_suite(const fs::path& work) {
  Outcome out;
  const auto corpus = synth_corpus(2, 41, test_features(), work / "metric_corpus");
  const auto& u = corpus.entries[0];
  out.check(mcd(u.mel, u.mel) == 0.0, "mcd(x, x) == 0");

  Rng rng(3);
  std::vector<std::vector<double>> ref, test;
  std::vector<double> offset(13);
  double sq = 0.0;
  for (auto& o : offset) {
    o = rng.normal();
    sq += o * o;
  }
  for (int f = 0; f < 50; ++f) {
    std::vector<double> c(13);
    for (auto& v : c) v = rng.normal();
    ref.push_back(c);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += offset[k];
    test.push_back(c);
  }
  const double closed = 10.0 / std::log(10.0) * std::sqrt(2.0 * sq);
  const double got = mcd_cepstra(ref, test);
  out.check(std::abs(got - closed) < kOffsetMcdTol, str("constant-offset MCD ", got, " vs ", closed));

  const auto clean = load_audio(u.utterance.audio_path, 22050);
  const double self = stoi(clean, clean, 22050);
  out.check(self >= kStoiSelf, str("stoi(x, x) = ", self));
  std::vector<double> scores;
  double power = 0.0;
  for (float v : clean) power += static_cast<double>(v) * v;
  power /= static_cast<double>(clean.size());
  for (double snr : {-10.0, -5.0, 0.0, 5.0, 10.0}) {
    Rng noise_rng(17);
    const double sigma = std::sqrt(power / std::pow(10.0, snr / 10.0));
    auto noisy = clean;
    for (auto& v : noisy) v += static_cast<float>(sigma * noise_rng.normal());
    scores.push_back(stoi(clean, noisy, 22050));
  }
  bool monotone = true;
  for (std::size_t i = 1; i < scores.size(); ++i) monotone = monotone && scores[i] > scores[i - 1];
  out.check(monotone, "STOI not monotone in SNR");

  const PesqAdapter none;
  out.check(!none.available() && !none.score(clean, clean, 22050).has_value(), "unconfigured PESQ yields no score");
  const PesqAdapter broken("false");
  out.check(!broken.score(clean, clean, 22050).has_value(), "failing PESQ tool yields no score");
  OracleGenerator oracle;
  EvalConfig eval;
  eval.vocoder.iterations = 4;
  std::vector<const AlignedUtterance*> items{&corpus.entries[0], &corpus.entries[1]};
  const auto report = evaluate_corpus(items, oracle, test_features(), eval, none);
  out.check(report.table().find("unavailable") != std::string::npos, "report marks PESQ unavailable");
  out.check(!report.pesq_copy().mean.has_value(), "no PESQ mean without a scorer");
  std::string snr_trace;
  for (double s : scores) snr_trace += str(std::setprecision(3), s, " ");
  out.note(str("stoi self ", self, "; STOI at -10..10 dB: ", snr_trace, "; PESQ unavailable handled"));
  return out;
}

// ---- 7 ----------------------------------------------------------------------

Outcome edit_suite(const fs::path& source_dir, const fs::path& work) {
  Outcome out;
  auto& run = overfit(source_dir, work);
  if (!run.ok) {
    out.check(false, "overfit model unavailable: " + run.error);
    return out;
  }
  const auto manifest = load_prepared_manifest(run.config);
  const auto& original = manifest.entries[0];
  const auto noop = run_edit(run.config, original.utterance.id, EditScript{}, work / "edits" / "noop", 1);
  out.check(noop.result.mel.bit_equal(original.mel), "no-op edit bit-identical");

  auto model = load_model(RunPaths(run.config).model_checkpoint);
  const auto lexicon = Lexicon::load(RunPaths(run.config).lexicon);
  const auto schedule = make_schedule(run.config.schedule);
  const auto words = original.words.size();
  std::vector<std::pair<std::string, EditScript>> scripts{
      {"insert", EditScript{{EditOp{EditKind::Insert, 1, 0, 0, "moon"}}}},
      {"replace", EditScript{{EditOp{EditKind::Replace, 0, 0, 1, "lemon shell"}}}},
      {"delete", EditScript{{EditOp{EditKind::Delete, 0, words - 1, words, ""}}}},
      {"mixed", EditScript{{EditOp{EditKind::Replace, 0, 0, 1, "fast"}, EditOp{EditKind::Insert, words, 0, 0, "snow"}}}},
  };
  std::string summary;
  for (const auto& [name, script] : scripts) {
    Rng rng(5);
    const auto result = edit_utterance(model, original, script, lexicon, schedule, rng);
    const auto& plan = result.plan;
    bool ok = result.mel.num_frames() == plan.num_frames() && plan.source_frame.size() == plan.num_frames();
    std::size_t context = 0, bad = 0, region_frames = 0;
    const auto flags = plan.regions.frame_flags(plan.num_frames());
    for (std::size_t f = 0; ok && f < plan.num_frames(); ++f) {
      if (flags[f]) {
        ++region_frames;
        ok = ok && !plan.source_frame[f].has_value();
        continue;
      }
      ok = ok && plan.source_frame[f].has_value();
      if (!plan.source_frame[f]) break;
      ++context;
      for (std::size_t m = 0; m < original.mel.num_mels(); ++m) {
        bad += !same_bits(result.mel.at(f, m), original.mel.at(*plan.source_frame[f], m));
      }
    }
    // Region lengths follow the planned phoneme durations.
    std::size_t planned = 0;
    for (const auto& r : plan.regions.regions) {
      const auto offsets = plan.edited.phone_offsets();
      ok = ok && r.start_frame == offsets[r.first_phone] && r.end_frame == offsets[r.last_phone + 1];
      planned += r.length();
    }
    ok = ok && planned == region_frames;
    if (name != "delete") ok = ok && !plan.regions.regions.empty();
    out.check(ok && bad == 0, str(name, ": ", bad, " context values differ, ", region_frames, " region frames"));
    summary += str(name, " ", context, "+", region_frames, " frames; ");
  }

  // End-to-end smoke run at the test profile, timed in CPU seconds.
  const double start = cpu_seconds();
  auto smoke = profile(source_dir, work / "smoke");
  try {
    run_synthset(smoke);
    run_pretrain_gst(smoke);
    run_train(smoke);
    const auto first = load_prepared_manifest(smoke).entries.front().utterance.id;
    run_edit(smoke, first, EditScript{{EditOp{EditKind::Insert, 1, 0, 0, "low"}}}, work / "smoke" / "edit", 3);
    run_evaluate(smoke);
  } catch (const std::exception& e) {
    out.check(false, std::string("smoke run: ") + e.what());
  }
  const double elapsed = cpu_seconds() - start;
  out.check(elapsed < kSmokeCpuSeconds, str("smoke run ", elapsed, " CPU s"));
  out.note(summary + str("smoke run ", std::setprecision(4), elapsed, " CPU s"));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seamless acceptance suite"};
  std::string source_dir = SEAMLESS_SOURCE_DIR;
  std::string work_dir = (fs::temp_directory_path() / "seamless_acceptance").string();
  std::vector<int> only;
  app.add_option("--source-dir", source_dir, "Repository root (for configs/)");
  app.add_option("--work-dir", work_dir, "Scratch directory, wiped at start");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  log::set_threshold(log::Level::Warn);

  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss correctness (L_AC, L_PC)", loss_suite},
      {"diffusion oracle", diffusion_suite},
      {"masking statistics", masking_suite},
      {"overfit reproduction", [&] { return overfit_suite(source_dir, work); }},
      {"ablation plumbing", [&] { return ablation_suite(source_dir, work); }},
      {"metric self-tests", [&] { return metric_suite(work); }},
      {"edit pipeline", [&] { return edit_suite(source_dir, work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto wall = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.check(false, std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall).count();
    std::string detail;
    for (const auto& n : outcome.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << criteria[i].first << " ["
              << std::fixed << std::setprecision(1) << seconds << " s] " << detail << std::endl;
    std::cout.unsetf(std::ios::fixed);
    failures += !outcome.pass;
  }
  return failures == 0 ? 0 : 1;
}
