#include "odectrl/experiment.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "odectrl/adjoint.hpp"
#include "odectrl/rng.hpp"
#include "odectrl/tableau.hpp"

namespace odectrl {

namespace {

using ordered_json = nlohmann::ordered_json;

// Fixed offset between the train and test draw of a generator, so the two
// splits are independent but a config still pins both.
constexpr std::uint64_t kTestSeedOffset = 1000003;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_parent_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + out_dir + ": " +
                             ec.message());
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config file " + path + " must hold a JSON object");

  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "architecture") cfg.architecture = value.get<std::string>();
    else if (key == "tableau") cfg.tableau = value.get<std::string>();
    else if (key == "layers") cfg.layers = value.get<int>();
    else if (key == "dt") cfg.dt = value.get<double>();
    else if (key == "iters") cfg.iters = value.get<int>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "data") cfg.data = value.get<std::string>();
    else if (key == "idx_images") cfg.idx_images = value.get<std::string>();
    else if (key == "idx_labels") cfg.idx_labels = value.get<std::string>();
    else if (key == "samples") cfg.samples = value.get<int>();
    else if (key == "out") cfg.out_dir = value.get<std::string>();
    else if (key == "fixed_classifier") cfg.fixed_classifier = value.get<bool>();
    else if (key == "threads") cfg.threads = value.get<int>();
    else if (key == "target_acc") cfg.target_acc = value.get<double>();
    else throw std::runtime_error("config file " + path + " has unknown key '" + key + "'");
  }
  return cfg;
}

int default_sample_count(const std::string& name) {
  return name == "donut1d" ? 500 : 1000;
}

ResolvedData resolve_data(const ExperimentConfig& cfg) {
  if (cfg.data == "mnist100") {
    if (cfg.idx_images.empty() || cfg.idx_labels.empty())
      throw std::invalid_argument(
          "data 'mnist100' needs the idx image and label paths");
    auto [train, test] =
        load_idx(cfg.idx_images, cfg.idx_labels, 0, 8, 100, 500, cfg.seed);
    return {std::move(train), std::move(test)};
  }
  if (cfg.data == "donut1d" || cfg.data == "donut2d" || cfg.data == "squares" ||
      cfg.data == "spiral") {
    const int m = cfg.samples > 0 ? cfg.samples : default_sample_count(cfg.data);
    return {generate(cfg.data, m, cfg.seed),
            generate(cfg.data, m, cfg.seed + kTestSeedOffset)};
  }
  // Anything else is a CSV path: seeded shuffle, then a half/half split.
  LabeledDataset all = load_csv(cfg.data);
  if (all.size() < 2)
    throw std::runtime_error("dataset " + cfg.data + " has fewer than 2 samples");
  std::vector<Eigen::Index> order(all.size());
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  Rng rng(cfg.seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bits() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const Eigen::Index train_m = (all.size() + 1) / 2;
  auto take = [&](Eigen::Index lo, Eigen::Index hi) {
    LabeledDataset d;
    d.features.resize(hi - lo, all.width());
    d.labels.resize(hi - lo);
    for (Eigen::Index i = lo; i < hi; ++i) {
      d.features.row(i - lo) = all.features.row(order[i]);
      d.labels(i - lo) = all.labels(order[i]);
    }
    return d;
  };
  return {take(0, train_m), take(train_m, all.size())};
}

NetworkConfig<double> build_network(const ExperimentConfig& cfg, int width) {
  NetworkConfig<double> net;
  net.kind = architecture_from_name(cfg.architecture);
  net.tableau = make_tableau<double>(cfg.tableau);
  net.width = width;
  net.layers = cfg.layers;
  if (cfg.dt > 0) {
    net.dt = cfg.dt;
  } else {
    // Total integration time T = 5. The simplex kind's alphas sum to one,
    // so there dt itself plays the role of T.
    constexpr double kHorizon = 5.0;
    net.dt = net.kind == Architecture::OdeNetSimplex ? kHorizon
                                                     : kHorizon / cfg.layers;
  }
  return net;
}

namespace {

void write_history(const std::string& path, const TrainRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "iter,train_loss,test_loss,train_acc,test_acc,lipschitz\n";
  for (std::size_t k = 0; k < rec.train_loss.size(); ++k) {
    out << k << ',' << format_double(rec.train_loss[k]) << ','
        << format_double(rec.test_loss[k]) << ',' << format_double(rec.train_acc[k])
        << ',' << format_double(rec.test_acc[k]) << ','
        << format_double(rec.lipschitz[k]) << '\n';
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

void write_alphas(const std::string& path, const TrainRecord& rec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const Eigen::Index n_layers = rec.alphas.empty() ? 0 : rec.alphas.front().size();
  out << "iter";
  for (Eigen::Index j = 0; j < n_layers; ++j) out << ",alpha_" << (j + 1);
  out << '\n';
  for (std::size_t k = 0; k < rec.alphas.size(); ++k) {
    out << k;
    for (Eigen::Index j = 0; j < n_layers; ++j)
      out << ',' << format_double(rec.alphas[k](j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

// At most the first 16 state coordinates are dumped; enough for the 2-D
// figures this feeds, and it keeps MNIST-sized runs from writing huge files.
void write_trajectory(const std::string& path, const NetworkConfig<double>& net,
                      const ParameterSet<double>& params,
                      const LabeledDataset& test, int threads) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const Eigen::Index dump = std::min<Eigen::Index>(net.width, 16);
  out << "sample,label,layer";
  for (Eigen::Index d = 0; d < dump; ++d) out << ",y_" << (d + 1);
  out << '\n';
  const auto caches = forward_batch(net, params.controls, test.features, threads);
  for (std::size_t s = 0; s < caches.size(); ++s) {
    for (std::size_t j = 0; j < caches[s].states.size(); ++j) {
      out << s << ',' << test.labels(static_cast<Eigen::Index>(s)) << ',' << j;
      for (Eigen::Index d = 0; d < dump; ++d)
        out << ',' << format_double(caches[s].states[j](d, 0));
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

ordered_json matrix_to_json(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const ordered_json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  if (r == 0) throw std::runtime_error("params.json: empty matrix");
  const Eigen::Index c = static_cast<Eigen::Index>(rows.at(0).size());
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows.at(i);
    if (static_cast<Eigen::Index>(row.size()) != c)
      throw std::runtime_error("params.json: ragged matrix");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

}  // namespace

void save_params(const std::string& path, const ExperimentConfig& cfg,
                 const NetworkConfig<double>& net, const ParameterSet<double>& params,
                 int iterations) {
  ordered_json j;
  j["architecture"] = architecture_name(net.kind);
  j["tableau"] = net.tableau.name;
  j["width"] = net.width;
  j["layers"] = net.layers;
  j["dt"] = net.dt;
  j["iterations"] = iterations;
  j["seed"] = cfg.seed;
  j["fixed_classifier"] = cfg.fixed_classifier;
  j["data"] = cfg.data;
  ordered_json controls = ordered_json::array();
  for (const auto& u : params.controls) {
    ordered_json layer;
    layer["weight"] = matrix_to_json(u.weight);
    ordered_json bias = ordered_json::array();
    for (Eigen::Index i = 0; i < u.bias.size(); ++i) bias.push_back(u.bias(i));
    layer["bias"] = std::move(bias);
    layer["alpha"] = u.alpha;
    controls.push_back(std::move(layer));
  }
  j["controls"] = std::move(controls);
  ordered_json head;
  ordered_json w = ordered_json::array();
  for (Eigen::Index i = 0; i < params.head.weight.size(); ++i)
    w.push_back(params.head.weight(i));
  head["weight"] = std::move(w);
  head["bias"] = params.head.bias;
  j["classifier"] = std::move(head);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

StoredParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + " is not valid JSON: " + e.what());
  }
  StoredParams sp;
  try {
    sp.network.kind = architecture_from_name(j.at("architecture").get<std::string>());
    sp.network.tableau = make_tableau<double>(j.at("tableau").get<std::string>());
    sp.network.width = j.at("width").get<int>();
    sp.network.layers = j.at("layers").get<int>();
    sp.network.dt = j.at("dt").get<double>();
    for (const auto& layer : j.at("controls")) {
      LayerControls<double> u;
      u.weight = matrix_from_json(layer.at("weight"));
      const auto& bias = layer.at("bias");
      u.bias.resize(static_cast<Eigen::Index>(bias.size()));
      for (Eigen::Index i = 0; i < u.bias.size(); ++i) u.bias(i) = bias.at(i).get<double>();
      u.alpha = layer.at("alpha").get<double>();
      sp.params.controls.push_back(std::move(u));
    }
    const auto& head = j.at("classifier");
    const auto& w = head.at("weight");
    sp.params.head.weight.resize(static_cast<Eigen::Index>(w.size()));
    for (Eigen::Index i = 0; i < sp.params.head.weight.size(); ++i)
      sp.params.head.weight(i) = w.at(i).get<double>();
    sp.params.head.bias = head.at("bias").get<double>();
  } catch (const ordered_json::exception& e) {
    throw std::runtime_error(path + " does not look like saved parameters: " + e.what());
  }
  if (static_cast<int>(sp.params.controls.size()) != sp.network.layers)
    throw std::runtime_error(path + ": layer count does not match stored controls");
  return sp;
}

RunResult run_training(const ExperimentConfig& cfg) {
  ResolvedData data = resolve_data(cfg);
  if (data.train.width() != data.test.width())
    throw std::runtime_error("train/test feature widths disagree");

  RunResult result;
  result.network = build_network(cfg, static_cast<int>(data.train.width()));

  TrainOptions opts;
  opts.max_iters = cfg.iters;
  opts.seed = cfg.seed;
  opts.fixed_classifier = cfg.fixed_classifier;
  opts.target_train_accuracy = cfg.target_acc;
  result.record = train(result.network, data.train.features, data.train.labels,
                        data.test.features, data.test.labels, opts);

  ensure_parent_dir(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  result.history_path = (dir / "history.csv").string();
  result.params_path = (dir / "params.json").string();
  result.trajectory_path = (dir / "trajectory.csv").string();
  write_history(result.history_path, result.record);
  save_params(result.params_path, cfg, result.network, result.record.params,
              result.record.iterations);
  write_trajectory(result.trajectory_path, result.network, result.record.params,
                   data.test, cfg.threads);
  if (has_alpha(result.network.kind)) {
    result.alphas_path = (dir / "alphas.csv").string();
    write_alphas(result.alphas_path, result.record);
  }
  return result;
}

void run_generate(const std::string& name, int count, std::uint64_t seed,
                  const std::string& out_path) {
  const LabeledDataset d = generate(name, count, seed);
  const auto parent = std::filesystem::path(out_path).parent_path();
  if (!parent.empty()) ensure_parent_dir(parent.string());
  save_csv(out_path, d);
}

EvalResult run_eval(const std::string& params_path, const LabeledDataset& data) {
  const StoredParams sp = load_params(params_path);
  if (data.width() != sp.network.width)
    throw std::invalid_argument("eval: dataset width " + std::to_string(data.width()) +
                                " does not match stored network width " +
                                std::to_string(sp.network.width));
  const MatrixXd x = data.features.transpose();
  const auto cache = forward(sp.network, sp.params.controls, x);
  EvalResult ev;
  ev.loss = batch_loss(sp.params.head, cache.states.back(), data.labels);
  ev.accuracy = accuracy(sp.params.head, cache.states.back(), data.labels);
  ev.count = data.size();
  return ev;
}

}  // namespace odectrl
