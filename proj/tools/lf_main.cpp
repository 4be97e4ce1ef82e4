#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "lf/bench.hpp"
#include "lf/checkpoint.hpp"
#include "lf/config.hpp"
#include "lf/corpus.hpp"
#include "lf/grad_check.hpp"
#include "lf/led_task.hpp"
#include "lf/parallel.hpp"
#include "lf/train.hpp"

namespace {

using namespace lf;

std::vector<std::size_t> parse_csv_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::uint64_t resolve_seed(const TrainConfig& cfg) {
  return cfg.seed != 0 ? cfg.seed : global_seed();
}

int cmd_pattern_render(std::size_t n, long window, long dilation, const std::string& globals,
                       const std::string& mode, const std::string& out) {
  if (window < 0 || window % 2 != 0) throw UsageError("--window must be even and >= 0");
  PatternConfig cfg;
  cfg.n = n;
  cfg.half_window = window / 2;
  cfg.dilation = dilation;
  cfg.mode = mode == "causal" ? AttnMode::causal : AttnMode::bidirectional;
  cfg.global_positions = parse_csv_sizes(globals);
  std::sort(cfg.global_positions.begin(), cfg.global_positions.end());
  if (ends_with(out, ".pgm")) {
    write_pattern_pgm(render_pattern(cfg), n, out);
  } else if (ends_with(out, ".csv")) {
    if (n <= 4096) {
      write_pattern_csv(render_pattern(cfg), n, out);
    } else {
      write_pattern_indices_csv(cfg, out);  // streaming, no dense guard
    }
  } else {
    throw UsageError("--out must end in .pgm or .csv");
  }
  std::cout << "pattern written to " << out << " (nonzero_count=" << nonzero_count(cfg)
            << ")\n";
  return 0;
}

int cmd_bench(const std::string& impl_name, const std::string& n_csv, long window,
              std::size_t repeats, std::size_t dk, const std::string& mode_name,
              const std::string& out) {
  if (window <= 0 || window % 2 != 0) throw UsageError("--window must be even and positive");
  const BandImpl impl = band_impl_from_name(impl_name);
  const AttnMode mode = mode_name == "causal" ? AttnMode::causal : AttnMode::bidirectional;
  const std::vector<std::size_t> n_list = parse_csv_sizes(n_csv);
  ScalingReport report = time_scaling(impl, n_list, window / 2, repeats, dk, mode);
  write_scaling_csv(report, out);
  std::cout << "impl=" << band_impl_name(impl) << " threads=" << worker_count()
            << " time_slope=" << report.time_slope << " score_slope=" << report.score_slope
            << "\nwritten to " << out << '\n';
  return 0;
}

template <typename T>
int run_train_charlm(const TrainConfig& cfg, const std::string& corpus_path,
                     const std::string& out) {
  const Corpus corpus = load_corpus(corpus_path);
  const std::uint64_t seed = resolve_seed(cfg);
  Model<T> model = Model<T>::init(cfg.model, seed);
  AdamW<T> opt(cfg.schedule.adam);
  std::ofstream metrics(out + ".metrics.csv");
  write_metrics_header(metrics);
  const std::vector<std::uint8_t> train_bytes = corpus.train();
  try {
    for (std::size_t k = 0; k < cfg.schedule.phases.size(); ++k) {
      const Phase& phase = cfg.schedule.phases[k];
      TrainOpts opts;
      opts.seed = seed;
      opts.phase_index = k + 1;
      opts.grad_clip = cfg.schedule.grad_clip;
      opts.warmup_frac = cfg.schedule.warmup_frac;
      opts.warmup_max = cfg.schedule.warmup_max;
      opts.metrics = &metrics;
      const auto logs = train_phase(model, opt, train_bytes, phase, opts);
      std::cout << "phase " << k + 1 << ": " << logs.size() << " steps, final bpc "
                << (logs.empty() ? 0.0 : logs.back().bpc) << '\n';
    }
  } catch (const NumericError&) {
    save_model(model, out + ".diag");
    std::cerr << "diagnostic snapshot written to " << out << ".diag\n";
    throw;
  }
  save_model(model, out);
  std::cout << "checkpoint written to " << out << '\n';
  return 0;
}

int cmd_train_charlm(const std::string& config_path, const std::string& corpus_path,
                     const std::string& out) {
  const TrainConfig cfg = load_train_config(config_path);
  if (cfg.model.arch != Arch::charlm) throw UsageError("train-charlm: config arch != charlm");
  if (!cfg.has_schedule) throw UsageError("train-charlm: config has no schedule section");
  return cfg.model.dtype == Dtype::f64 ? run_train_charlm<double>(cfg, corpus_path, out)
                                       : run_train_charlm<float>(cfg, corpus_path, out);
}

template <typename T>
double run_eval_bpc(const std::vector<RawTensor>& raw, const std::vector<std::uint8_t>& bytes,
                    std::size_t eval_len, std::size_t step) {
  const Model<T> model = model_from_raw<T>(raw);
  return eval_bpc_sliding(model, bytes, EvalProtocol{eval_len, step});
}

int cmd_eval_bpc(const std::string& ckpt, const std::string& corpus_path, std::size_t eval_len,
                 std::size_t step, const std::string& split) {
  const auto raw = load_checkpoint_file(ckpt);
  const Corpus corpus = load_corpus(corpus_path);
  std::vector<std::uint8_t> bytes;
  if (split == "train") bytes = corpus.train();
  else if (split == "dev") bytes = corpus.dev();
  else if (split == "test") bytes = corpus.test();
  else if (split == "all") bytes = corpus.bytes;
  else throw UsageError("--split must be train, dev, test or all");
  const double bpc = checkpoint_dtype(raw) == Dtype::f64
                         ? run_eval_bpc<double>(raw, bytes, eval_len, step)
                         : run_eval_bpc<float>(raw, bytes, eval_len, step);
  std::cout << "split=" << split << " tokens=" << bytes.size() << " bpc=" << bpc << '\n';
  return 0;
}

int cmd_extend_pos(const std::string& ckpt, std::size_t target_len, const std::string& out) {
  auto raw = load_checkpoint_file(ckpt);
  RawTensor* pos = nullptr;
  RawTensor* maxpos = nullptr;
  for (auto& t : raw) {
    if (t.name == "pos_embed") pos = &t;
    if (t.name == "meta.max_positions") maxpos = &t;
  }
  if (!pos || !maxpos) throw DataError("extend-pos: checkpoint has no position table");
  if (pos->dims.size() != 2) throw DataError("extend-pos: pos_embed is not rank-2");
  const std::size_t m = pos->dims[0];
  if (target_len < m)
    throw UsageError("extend-pos: target " + std::to_string(target_len) +
                     " smaller than current " + std::to_string(m));
  const std::size_t row_bytes = pos->bytes.size() / m;
  std::vector<std::uint8_t> extended(target_len * row_bytes);
  for (std::size_t i = 0; i < target_len; ++i)
    std::copy(pos->bytes.begin() + (i % m) * row_bytes,
              pos->bytes.begin() + (i % m + 1) * row_bytes,
              extended.begin() + i * row_bytes);
  pos->bytes = std::move(extended);
  pos->dims[0] = target_len;
  const double v = static_cast<double>(target_len);
  std::memcpy(maxpos->bytes.data(), &v, sizeof(v));
  save_checkpoint_file(out, raw);
  std::cout << "position table " << m << " -> " << target_len << ", written to " << out
            << '\n';
  return 0;
}

template <typename T>
int run_train_led(const TrainConfig& cfg, const std::string& out) {
  Model<T> model = Model<T>::init(cfg.model, resolve_seed(cfg));
  std::ofstream metrics(out + ".metrics.csv");
  LedTrainResult r = train_led_copy(model, cfg.copy_task, &metrics);
  save_model(model, out);
  std::cout << "steps=" << r.steps_run << " exact_match=" << r.final_exact_match
            << " loss=" << r.final_loss << "\ncheckpoint written to " << out << '\n';
  return 0;
}

int cmd_train_led(const std::string& config_path, const std::string& out) {
  const TrainConfig cfg = load_train_config(config_path);
  if (cfg.model.arch != Arch::led) throw UsageError("train-led: config arch != led");
  if (!cfg.has_copy_task) throw UsageError("train-led: config has no copy_task section");
  return cfg.model.dtype == Dtype::f64 ? run_train_led<double>(cfg, out)
                                       : run_train_led<float>(cfg, out);
}

template <typename T>
std::vector<std::size_t> run_generate(const std::vector<RawTensor>& raw,
                                      const std::vector<std::size_t>& src, std::size_t beam,
                                      std::size_t max_len, double penalty) {
  const Model<T> model = model_from_raw<T>(raw);
  return beam_search(model, src, beam, max_len, penalty);
}

int cmd_generate(const std::string& ckpt, const std::string& input, std::size_t beam,
                 std::size_t max_len, double penalty) {
  const auto raw = load_checkpoint_file(ckpt);
  std::ifstream in(input, std::ios::binary);
  if (!in) throw DataError("generate: cannot open " + input);
  std::vector<std::size_t> src{kBosId};
  char ch;
  while (in.get(ch)) src.push_back(static_cast<std::uint8_t>(ch));
  const auto out = checkpoint_dtype(raw) == Dtype::f64
                       ? run_generate<double>(raw, src, beam, max_len, penalty)
                       : run_generate<float>(raw, src, beam, max_len, penalty);
  for (std::size_t id : out)
    if (id < 256) std::cout << static_cast<char>(id);
  std::cout << std::endl;
  return 0;
}

int cmd_grad_check(const std::string& config_path, double tolerance) {
  TrainConfig cfg = load_train_config(config_path);
  cfg.model.dtype = Dtype::f64;  // verification runs in double
  Model<double> model = Model<double>::init(cfg.model, resolve_seed(cfg));
  Rng rng(resolve_seed(cfg) + 1);
  const std::size_t n = std::min<std::size_t>(16, cfg.model.max_positions - 1);

  std::function<Tensor<double>()> loss_fn;
  if (cfg.model.arch == Arch::led) {
    CopyTaskConfig task;
    task.payload_len = std::min<std::size_t>(12, cfg.model.max_positions - 2);
    auto [src, tgt] = copy_task_sample(task, rng);
    loss_fn = [&model, src = src, tgt = tgt] { return led_loss(src, tgt, model); };
  } else {
    std::vector<std::size_t> window(n + 1);
    for (auto& t : window) t = rng.uniform_int(256);
    if (cfg.model.arch == Arch::charlm) {
      loss_fn = [&model, window] { return charlm_loss(window, model); };
    } else {
      loss_fn = [&model, window] { return mlm_loss(window, model, 0.3, 7); };
    }
  }
  std::vector<Tensor<double>> params;
  for (auto& [name, p] : model.named_params()) params.push_back(p);
  const double err = grad_check(loss_fn, params, 1e-5, 8, resolve_seed(cfg));
  std::cout << "max relative error " << err << " (tolerance " << tolerance << ")\n";
  if (!(err < tolerance)) throw NumericError("grad-check failed: " + std::to_string(err));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"long-sequence sparse-attention engine"};
  app.require_subcommand(1);

  auto* render = app.add_subcommand("pattern", "attention pattern tools")
                     ->require_subcommand(1);
  auto* render_cmd = render->add_subcommand("render", "dump a pattern as PGM/CSV");
  std::size_t rn = 64;
  long rwindow = 8, rdilation = 1;
  std::string rglobals, rmode = "bidir", rout = "pattern.pgm";
  render_cmd->add_option("--n", rn, "sequence length")->required();
  render_cmd->add_option("--window", rwindow, "full window w = 2h (even)");
  render_cmd->add_option("--dilation", rdilation, "dilation step d >= 1 (1 = no gaps)");
  render_cmd->add_option("--global", rglobals, "comma-separated global positions");
  render_cmd->add_option("--mode", rmode, "bidir or causal")
      ->check(CLI::IsMember({"bidir", "causal"}));
  render_cmd->add_option("--out", rout, "output path (.pgm or .csv)")->required();

  auto* bench = app.add_subcommand("bench", "time/memory scaling harness");
  std::string bimpl = "loop", bn = "512,1024,2048,4096", bmode = "bidir", bout = "bench.csv";
  long bwindow = 128;
  std::size_t brepeats = 7, bdk = 64;
  bench->add_option("--impl", bimpl, "loop, chunk or dense")->required();
  bench->add_option("--n", bn, "comma-separated sequence lengths (ascending)");
  bench->add_option("--window", bwindow, "full window w = 2h (even)");
  bench->add_option("--repeats", brepeats, "timed repeats (median)");
  bench->add_option("--dk", bdk, "head dimension");
  bench->add_option("--mode", bmode, "bidir or causal")
      ->check(CLI::IsMember({"bidir", "causal"}));
  bench->add_option("--out", bout, "output CSV")->required();

  auto* tc = app.add_subcommand("train-charlm", "staged char-LM training");
  std::string tc_config, tc_corpus, tc_out = "charlm.lfck";
  tc->add_option("--config", tc_config, "JSON config")->required();
  tc->add_option("--corpus", tc_corpus, "corpus file")->required();
  tc->add_option("--out", tc_out, "checkpoint path");

  auto* ev = app.add_subcommand("eval-bpc", "sliding-window BPC evaluation");
  std::string ev_ckpt, ev_corpus, ev_split = "test";
  std::size_t ev_len = 256, ev_step = 64;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--eval-len", ev_len, "window length L");
  ev->add_option("--step", ev_step, "stride s (scores the last s tokens per window)");
  ev->add_option("--split", ev_split, "train, dev, test or all");

  auto* ep = app.add_subcommand("extend-pos", "copy-tile the position table");
  std::string ep_ckpt, ep_out;
  std::size_t ep_target = 0;
  ep->add_option("--ckpt", ep_ckpt)->required();
  ep->add_option("--target-len", ep_target)->required();
  ep->add_option("--out", ep_out, "output checkpoint")->required();

  auto* tl = app.add_subcommand("train-led", "LED training on the synthetic copy task");
  std::string tl_config, tl_out = "led.lfck";
  tl->add_option("--config", tl_config)->required();
  tl->add_option("--out", tl_out);

  auto* gen = app.add_subcommand("generate", "beam-search generation from an LED checkpoint");
  std::string gen_ckpt, gen_input;
  std::size_t gen_beam = 4, gen_max = 128;
  double gen_penalty = 1.0;
  gen->add_option("--ckpt", gen_ckpt)->required();
  gen->add_option("--input", gen_input, "source bytes file")->required();
  gen->add_option("--beam", gen_beam);
  gen->add_option("--max-len", gen_max);
  gen->add_option("--length-penalty", gen_penalty);

  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");
  std::string gc_config;
  double gc_tol = 1e-4;
  gc->add_option("--config", gc_config)->required();
  gc->add_option("--tolerance", gc_tol);

  try {
    app.parse(argc, argv);
    if (render_cmd->parsed())
      return cmd_pattern_render(rn, rwindow, rdilation, rglobals, rmode, rout);
    if (bench->parsed())
      return cmd_bench(bimpl, bn, bwindow, brepeats, bdk, bmode, bout);
    if (tc->parsed()) return cmd_train_charlm(tc_config, tc_corpus, tc_out);
    if (ev->parsed()) return cmd_eval_bpc(ev_ckpt, ev_corpus, ev_len, ev_step, ev_split);
    if (ep->parsed()) return cmd_extend_pos(ep_ckpt, ep_target, ep_out);
    if (tl->parsed()) return cmd_train_led(tl_config, tl_out);
    if (gen->parsed()) return cmd_generate(gen_ckpt, gen_input, gen_beam, gen_max, gen_penalty);
    if (gc->parsed()) return cmd_grad_check(gc_config, gc_tol);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
