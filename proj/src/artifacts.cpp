#include "difs/artifacts.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace difs {

namespace {

void write_bytes(std::ofstream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("unexpected end of file");
}

json schedule_to_json(const Schedule& s) {
  return json{{"steps", s.steps}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}};
}

Schedule schedule_from_json(const json& j) {
  return make_schedule(j.at("steps").get<int>(), j.at("beta_min").get<double>(),
                       j.at("beta_max").get<double>());
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  json j;
  j["method"] = ckpt.method;
  j["environment"] = ckpt.environment;
  j["seed"] = ckpt.seed;
  if (ckpt.difs_model) {
    const DifsModel& m = *ckpt.difs_model;
    json net;
    net["dim_x"] = m.net.dim_x;
    net["hidden"] = m.net.hidden;
    net["time_embed_dim"] = m.net.time_embed_dim;
    net["cond_embed_dim"] = m.net.cond_embed_dim;
    net["activation"] = m.net.activation;
    net["conditional"] = m.net.conditional;
    net["r_lo"] = m.net.r_lo;
    net["r_hi"] = m.net.r_hi;
    json layers = json::array();
    for (size_t l = 0; l < m.net.weights.size(); ++l) {
      layers.push_back(json{{"rows", m.net.weights[l].rows},
                            {"cols", m.net.weights[l].cols},
                            {"weights", m.net.weights[l].data},
                            {"biases", m.net.biases[l]}});
    }
    net["layers"] = std::move(layers);
    j["denoiser"] = std::move(net);
    j["schedule"] = schedule_to_json(m.schedule);
    j["standardize_mean"] = m.standardize_mean;
    j["standardize_scale"] = m.standardize_scale;
  }
  if (ckpt.gmm) {
    j["gmm"] = json{{"weights", ckpt.gmm->weights},
                    {"means", ckpt.gmm->means},
                    {"vars", ckpt.gmm->vars}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  ModelCheckpoint ckpt;
  ckpt.method = j.at("method").get<std::string>();
  ckpt.environment = j.at("environment").get<std::string>();
  ckpt.seed = j.at("seed").get<uint64_t>();
  if (j.contains("denoiser")) {
    DifsModel m;
    const json& net = j.at("denoiser");
    m.net.dim_x = net.at("dim_x").get<int>();
    m.net.hidden = net.at("hidden").get<std::vector<int>>();
    m.net.time_embed_dim = net.at("time_embed_dim").get<int>();
    m.net.cond_embed_dim = net.at("cond_embed_dim").get<int>();
    m.net.activation = net.at("activation").get<std::string>();
    m.net.conditional = net.at("conditional").get<bool>();
    m.net.r_lo = net.at("r_lo").get<double>();
    m.net.r_hi = net.at("r_hi").get<double>();
    for (const json& layer : net.at("layers")) {
      Mat w(layer.at("rows").get<int>(), layer.at("cols").get<int>());
      w.data = layer.at("weights").get<std::vector<double>>();
      if (w.data.size() != static_cast<size_t>(w.rows) * w.cols)
        throw std::runtime_error("checkpoint layer size mismatch");
      m.net.weights.push_back(std::move(w));
      m.net.biases.push_back(layer.at("biases").get<Vec>());
    }
    m.schedule = schedule_from_json(j.at("schedule"));
    m.standardize_mean = j.at("standardize_mean").get<Vec>();
    m.standardize_scale = j.at("standardize_scale").get<Vec>();
    ckpt.difs_model = std::move(m);
  }
  if (j.contains("gmm")) {
    Gmm g;
    g.weights = j.at("gmm").at("weights").get<Vec>();
    g.means = j.at("gmm").at("means").get<std::vector<Vec>>();
    g.vars = j.at("gmm").at("vars").get<std::vector<Vec>>();
    ckpt.gmm = std::move(g);
  }
  return ckpt;
}

void save_dataset(const std::string& path, const LabeledDataset& dataset, int dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  const char magic[8] = {'D', 'I', 'F', 'S', 'D', 'S', '0', '1'};
  write_bytes(out, magic, 8);
  const uint32_t version = 1;
  const uint32_t d = static_cast<uint32_t>(dim);
  const uint64_t count = dataset.size();
  write_bytes(out, &version, 4);
  write_bytes(out, &d, 4);
  write_bytes(out, &count, 8);
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.xs[i].size() != static_cast<size_t>(dim))
      throw std::invalid_argument("save_dataset: row dimension mismatch");
    write_bytes(out, dataset.xs[i].data(), sizeof(double) * dim);
    write_bytes(out, &dataset.rs[i], sizeof(double));
  }
}

LabeledDataset load_dataset(const std::string& path, int* dim_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  read_bytes(in, magic, 8);
  if (std::memcmp(magic, "DIFSDS01", 8) != 0)
    throw std::runtime_error(path + ": not a dataset file");
  uint32_t version = 0, d = 0;
  uint64_t count = 0;
  read_bytes(in, &version, 4);
  read_bytes(in, &d, 4);
  read_bytes(in, &count, 8);
  if (version != 1) throw std::runtime_error("unsupported dataset version");
  LabeledDataset out;
  for (uint64_t i = 0; i < count; ++i) {
    Vec x(d);
    double r = 0.0;
    read_bytes(in, x.data(), sizeof(double) * d);
    read_bytes(in, &r, sizeof(double));
    out.append(std::move(x), r, 0);
  }
  if (dim_out) *dim_out = static_cast<int>(d);
  return out;
}

void save_ground_truth(const std::string& path, const GroundTruth& gt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  const char magic[8] = {'D', 'I', 'F', 'S', 'G', 'T', '0', '1'};
  write_bytes(out, magic, 8);
  const uint32_t version = 1;
  const uint32_t d = gt.features.empty() ? 0 : static_cast<uint32_t>(gt.features[0].size());
  const uint64_t count = gt.features.size();
  write_bytes(out, &version, 4);
  write_bytes(out, &d, 4);
  write_bytes(out, &count, 8);
  write_bytes(out, &gt.seed, 8);
  write_bytes(out, &gt.draws, 8);
  write_bytes(out, &gt.estimate, 8);
  const uint8_t flag = gt.zero_failures ? 1 : 0;
  write_bytes(out, &flag, 1);
  for (const auto& f : gt.features) write_bytes(out, f.data(), sizeof(double) * d);
}

GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  read_bytes(in, magic, 8);
  if (std::memcmp(magic, "DIFSGT01", 8) != 0)
    throw std::runtime_error(path + ": not a ground-truth file");
  uint32_t version = 0, d = 0;
  uint64_t count = 0;
  read_bytes(in, &version, 4);
  read_bytes(in, &d, 4);
  read_bytes(in, &count, 8);
  if (version != 1) throw std::runtime_error("unsupported ground-truth version");
  GroundTruth gt;
  read_bytes(in, &gt.seed, 8);
  read_bytes(in, &gt.draws, 8);
  read_bytes(in, &gt.estimate, 8);
  uint8_t flag = 0;
  read_bytes(in, &flag, 1);
  gt.zero_failures = flag != 0;
  gt.failures_seen = count;
  for (uint64_t i = 0; i < count; ++i) {
    Vec f(d);
    read_bytes(in, f.data(), sizeof(double) * d);
    gt.features.push_back(std::move(f));
  }
  return gt;
}

json ground_truth_report(const GroundTruth& gt) {
  json j;
  j["environment"] = gt.environment;
  j["seed"] = gt.seed;
  j["draws"] = gt.draws;
  j["failures_seen"] = gt.failures_seen;
  j["n_samples"] = gt.features.size();
  j["estimate"] = gt.estimate;
  j["zero_failures"] = gt.zero_failures;
  if (gt.analytic_probability) {
    j["analytic_failure_probability"] = *gt.analytic_probability;
    j["estimator"] = "importance sampling, mixture proposal N((+-3.5, 3.5), I)";
  }
  if (gt.reference_estimate) {
    j["reference_estimate"] = *gt.reference_estimate;
    j["reference_note"] =
        "independently reported Monte Carlo estimate for this benchmark; note "
        "it disagrees with the analytic probability 2*Phi(-3)^2 by roughly an "
        "order of magnitude";
  }
  return j;
}

json metrics_to_json(const MetricsReport& report) {
  json j;
  j["environment"] = report.environment;
  j["method"] = report.method;
  j["k"] = report.k;
  j["n_eval"] = report.n_eval;
  j["n_real"] = report.n_real;
  j["n_failing"] = report.n_failing;
  j["failure_rate"] = report.failure_rate;
  if (report.density)
    j["density"] = *report.density;
  else
    j["density"] = nullptr;
  if (report.coverage)
    j["coverage"] = *report.coverage;
  else
    j["coverage"] = nullptr;
  j["standardized_features"] = report.standardized_features;
  j["seed"] = report.seed;
  j["ground_truth"] = ground_truth_report(report.provenance);
  return j;
}

json iteration_to_json(const IterationRecord& rec) {
  return json{{"iteration", rec.iteration},
              {"threshold", rec.threshold},
              {"failure_fraction", rec.failure_fraction},
              {"mean_loss", rec.mean_loss}};
}

}  // namespace difs
