#include "cnmt/workload.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cnmt/error.hpp"
#include "cnmt/text_io.hpp"

namespace cnmt {

Corpus make_corpus(std::vector<Request> requests, std::string language_pair) {
  if (requests.empty()) throw EmptyCorpus("corpus has no requests");
  double sum = 0.0;
  for (const auto& r : requests) sum += r.m_true;
  Corpus c;
  c.m_avg = sum / static_cast<double>(requests.size());
  c.requests = std::move(requests);
  c.language_pair = std::move(language_pair);
  return c;
}

std::vector<LengthPair> length_pairs(const Corpus& corpus) {
  std::vector<LengthPair> pairs;
  pairs.reserve(corpus.requests.size());
  for (const auto& r : corpus.requests) pairs.push_back({r.n, r.m_true});
  return pairs;
}

namespace {

// splitmix64 finalizer; decorrelates neighbouring (seed, id) keys.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double realize_latency(const DeviceOracle& oracle, const Request& req) {
  const double mean = exec_time(oracle.true_profile, req.n, req.m_true);
  if (oracle.noise_sd <= 0.0) return mean;

  std::mt19937_64 rng(mix(mix(oracle.seed) ^ req.id));
  std::normal_distribution<double> noise(0.0, oracle.noise_sd);
  const double floor = 0.05 * mean;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double t = mean + noise(rng);
    if (t >= floor) return t;
  }
  return floor;
}

namespace {

int draw_length(const LengthDistribution& dist, std::mt19937_64& rng) {
  return std::visit(
      [&rng](const auto& d) -> int {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, UniformLengths>) {
          return std::uniform_int_distribution<int>(d.lo, d.hi)(rng);
        } else if constexpr (std::is_same_v<D, LogNormalLengths>) {
          const double x = std::lognormal_distribution<double>(d.mu, d.sigma)(rng);
          return static_cast<int>(std::clamp(std::round(x), 1.0, static_cast<double>(d.max_len)));
        } else {
          std::discrete_distribution<std::size_t> pick(d.weights.begin(), d.weights.end());
          const auto& c = d.components[pick(rng)];
          return std::uniform_int_distribution<int>(c.lo, c.hi)(rng);
        }
      },
      dist);
}

void validate(const LengthDistribution& dist) {
  const auto check_uniform = [](const UniformLengths& u) {
    if (u.lo < 1 || u.hi < u.lo) throw std::invalid_argument("uniform lengths need 1 <= lo <= hi");
  };
  if (const auto* u = std::get_if<UniformLengths>(&dist)) check_uniform(*u);
  if (const auto* l = std::get_if<LogNormalLengths>(&dist)) {
    if (!(l->sigma >= 0.0) || l->max_len < 1) throw std::invalid_argument("bad lognormal lengths");
  }
  if (const auto* m = std::get_if<MixtureLengths>(&dist)) {
    if (m->components.empty() || m->components.size() != m->weights.size()) {
      throw std::invalid_argument("mixture needs one weight per component");
    }
    for (const auto& c : m->components) check_uniform(c);
  }
}

}  // namespace

Corpus synth_corpus(const SynthSpec& spec) {
  if (spec.count < 1) throw std::invalid_argument("SynthSpec: count must be >= 1");
  validate(spec.n_distribution);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.length_noise_sd > 0 ? spec.length_noise_sd : 1.0);

  std::vector<Request> requests;
  requests.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const int n = draw_length(spec.n_distribution, rng);
    const double eps = spec.length_noise_sd > 0 ? noise(rng) : 0.0;
    const double m = std::round(spec.gamma * n + spec.delta + eps);
    requests.push_back({i, n, static_cast<int>(std::max(m, 1.0))});
  }
  return make_corpus(std::move(requests), spec.language_pair);
}

Corpus load_corpus(const std::string& path) {
  const auto table = read_table(path, '\t', {"n", "m_real"});
  std::vector<Request> requests;
  requests.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto n = parse_int(row.fields[0], path, row.line);
    const auto m = parse_int(row.fields[1], path, row.line);
    if (n < 1 || m < 1) throw ParseError(path, row.line, "lengths must be >= 1");
    requests.push_back({requests.size(), static_cast<int>(n), static_cast<int>(m)});
  }
  if (requests.empty()) throw EmptyCorpus(path + ": corpus has no rows");
  return make_corpus(std::move(requests), std::filesystem::path(path).stem().string());
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "n\tm_real\n";
  for (const auto& r : corpus.requests) out << r.n << '\t' << r.m_true << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<LatencySample> load_measurements(const std::string& path) {
  const auto table = read_table(path, ',', {"n", "m", "t_ms"});
  std::vector<LatencySample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto n = parse_int(row.fields[0], path, row.line);
    const auto m = parse_int(row.fields[1], path, row.line);
    const double t = parse_double(row.fields[2], path, row.line);
    if (n < 1 || m < 1) throw ParseError(path, row.line, "n and m must be >= 1");
    if (!(t > 0.0)) throw ParseError(path, row.line, "t_ms must be > 0");
    samples.push_back({static_cast<int>(n), static_cast<int>(m), t});
  }
  if (samples.empty()) throw EmptyFile(path + ": no measurements");
  return samples;
}

void save_measurements(std::span<const LatencySample> samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "n,m,t_ms\n";
  for (const auto& s : samples) out << s.n << ',' << s.m << ',' << format_double(s.t) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

std::vector<LatencySample> characterize(const DeviceOracle& oracle, const Corpus& corpus) {
  std::vector<LatencySample> samples;
  samples.reserve(corpus.requests.size());
  for (const auto& r : corpus.requests) {
    samples.push_back({r.n, r.m_true, realize_latency(oracle, r)});
  }
  return samples;
}

}  // namespace cnmt
