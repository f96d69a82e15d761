#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "odectrl/check.hpp"
#include "odectrl/data.hpp"
#include "odectrl/experiment.hpp"

namespace {

// Precedence for the output directory: --out flag, then ODECTRL_OUT, then
// the built-in default.
std::string default_out_dir() {
  if (const char* env = std::getenv("ODECTRL_OUT"); env && *env) return env;
  return "out";
}

int do_generate(const std::string& data, int count, std::uint64_t seed,
                const std::string& out) {
  odectrl::run_generate(data, count, seed, out);
  std::printf("wrote %d samples of %s to %s\n", count, data.c_str(), out.c_str());
  return 0;
}

int do_train(const odectrl::ExperimentConfig& cfg) {
  const odectrl::RunResult res = odectrl::run_training(cfg);
  const auto& rec = res.record;
  std::printf("iterations:  %d\n", rec.iterations);
  std::printf("train loss:  %.6g\n", rec.train_loss.back());
  std::printf("train acc:   %.4f\n", rec.train_acc.back());
  std::printf("test loss:   %.6g\n", rec.test_loss.back());
  std::printf("test acc:    %.4f\n", rec.test_acc.back());
  std::printf("artifacts:   %s\n", cfg.out_dir.c_str());
  return 0;
}

int do_check(const std::string& arch, const std::string& tableau,
             std::uint64_t seed, bool corrupt) {
  const odectrl::CheckReport rep = odectrl::run_check(arch, tableau, seed, corrupt);
  std::printf("gradient vs finite differences: max rel error %.3e (tolerance %.0e) %s\n",
              rep.gradient_error, rep.gradient_tolerance,
              rep.gradient_pass ? "PASS" : "FAIL");
  std::printf("costate/variational pairing:    drift %.3e (tolerance %.0e) %s\n",
              rep.drift, rep.drift_tolerance, rep.drift_pass ? "PASS" : "FAIL");
  return rep.pass() ? 0 : 1;
}

int do_eval(const std::string& params_path, const std::string& data, int count,
            std::uint64_t seed) {
  odectrl::LabeledDataset dataset;
  if (data == "donut1d" || data == "donut2d" || data == "squares" || data == "spiral") {
    const int m = count > 0 ? count : odectrl::default_sample_count(data);
    dataset = odectrl::generate(data, m, seed);
  } else {
    dataset = odectrl::load_csv(data);
  }
  const odectrl::EvalResult ev = odectrl::run_eval(params_path, dataset);
  std::printf("samples:  %ld\n", static_cast<long>(ev.count));
  std::printf("loss:     %.6g\n", ev.loss);
  std::printf("accuracy: %.4f\n", ev.accuracy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary classification with RK-discretized neural ODEs"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  std::string gen_data = "donut2d";
  int gen_count = 1000;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--data", gen_data, "donut1d, donut2d, squares or spiral");
  gen->add_option("--count", gen_count, "number of samples");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output CSV path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a network and write artifacts");
  std::string tr_config;
  odectrl::ExperimentConfig cfg;
  cfg.out_dir = default_out_dir();
  tr->add_option("--config", tr_config, "JSON config file; flags override its values");
  auto* f_arch = tr->add_option("--arch", cfg.architecture,
                                "net, resnet, odenet or odenet_simplex");
  auto* f_tab = tr->add_option("--tableau", cfg.tableau,
                               "euler, improved_euler, kutta3 or kutta4");
  auto* f_layers = tr->add_option("--layers", cfg.layers, "number of layers N");
  auto* f_dt = tr->add_option("--dt", cfg.dt, "step size; 0 picks the default");
  auto* f_iters = tr->add_option("--iters", cfg.iters, "max training iterations");
  auto* f_seed = tr->add_option("--seed", cfg.seed, "seed for data and init");
  auto* f_data = tr->add_option("--data", cfg.data,
                                "generator name, mnist100, or CSV path");
  auto* f_imgs = tr->add_option("--idx-images", cfg.idx_images, "IDX image file");
  auto* f_lbls = tr->add_option("--idx-labels", cfg.idx_labels, "IDX label file");
  auto* f_samples = tr->add_option("--samples", cfg.samples,
                                   "per-split sample count for generators");
  auto* f_out = tr->add_option("--out", cfg.out_dir, "output directory");
  auto* f_fixed = tr->add_flag("--fixed-classifier", cfg.fixed_classifier,
                               "keep W and mu at their initial values");
  auto* f_threads = tr->add_option("--threads", cfg.threads,
                                   "threads for per-sample propagation");
  auto* f_target = tr->add_option("--target-acc", cfg.target_acc,
                                  "stop once train accuracy reaches this");

  // check
  auto* ck = app.add_subcommand("check", "Run gradient and pairing self-checks");
  std::string ck_arch = "resnet";
  std::string ck_tab = "euler";
  std::uint64_t ck_seed = 1;
  bool ck_corrupt = false;
  ck->add_option("--arch", ck_arch, "architecture to check");
  ck->add_option("--tableau", ck_tab, "tableau to check");
  ck->add_option("--seed", ck_seed, "instance seed");
  ck->add_flag("--self-test-corrupt", ck_corrupt)->group("");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate stored parameters on a dataset");
  std::string ev_params;
  std::string ev_data = "donut1d";
  int ev_count = 0;
  std::uint64_t ev_seed = 1;
  ev->add_option("--params", ev_params, "params.json from a training run")->required();
  ev->add_option("--data", ev_data, "generator name or CSV path");
  ev->add_option("--count", ev_count, "sample count for generators");
  ev->add_option("--seed", ev_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return do_generate(gen_data, gen_count, gen_seed, gen_out);
    if (tr->parsed()) {
      if (!tr_config.empty()) {
        odectrl::ExperimentConfig from_file =
            odectrl::load_experiment_config(tr_config);
        // Flags that were actually given override the file.
        if (!*f_arch) cfg.architecture = from_file.architecture;
        if (!*f_tab) cfg.tableau = from_file.tableau;
        if (!*f_layers) cfg.layers = from_file.layers;
        if (!*f_dt) cfg.dt = from_file.dt;
        if (!*f_iters) cfg.iters = from_file.iters;
        if (!*f_seed) cfg.seed = from_file.seed;
        if (!*f_data) cfg.data = from_file.data;
        if (!*f_imgs) cfg.idx_images = from_file.idx_images;
        if (!*f_lbls) cfg.idx_labels = from_file.idx_labels;
        if (!*f_samples) cfg.samples = from_file.samples;
        if (!*f_out && from_file.out_dir != "out") cfg.out_dir = from_file.out_dir;
        if (!*f_fixed) cfg.fixed_classifier = from_file.fixed_classifier;
        if (!*f_threads) cfg.threads = from_file.threads;
        if (!*f_target) cfg.target_acc = from_file.target_acc;
      }
      return do_train(cfg);
    }
    if (ck->parsed()) return do_check(ck_arch, ck_tab, ck_seed, ck_corrupt);
    if (ev->parsed()) return do_eval(ev_params, ev_data, ev_count, ev_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
