#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cnmt/model.hpp"

namespace cnmt {

struct Request {
  std::uint64_t id = 0;
  int n = 1;
  int m_true = 1;

  bool operator==(const Request&) const = default;
};

struct Corpus {
  std::vector<Request> requests;
  double m_avg = 0.0;  ///< mean of m_true
  std::string language_pair;

  bool operator==(const Corpus&) const = default;
};

/// Builds a corpus, assigning m_avg. Throws EmptyCorpus for no requests.
Corpus make_corpus(std::vector<Request> requests, std::string language_pair = {});

std::vector<LengthPair> length_pairs(const Corpus& corpus);

/// Hidden ground truth for one device: a latency plane plus Gaussian noise.
struct DeviceOracle {
  DeviceProfile true_profile;
  double noise_sd = 0.0;  ///< ms
  std::uint64_t seed = 0;
};

/// Noisy execution time for a request. Noise is keyed by (seed, request id),
/// so repeated queries agree, and is truncated so the result stays at or
/// above 5% of the noiseless value.
double realize_latency(const DeviceOracle& oracle, const Request& req);

struct UniformLengths {
  int lo = 1;
  int hi = 100;
};

/// exp(N(mu, sigma)) rounded and clamped to [1, max_len].
struct LogNormalLengths {
  double mu = 3.0;
  double sigma = 0.5;
  int max_len = 100;
};

/// Weighted mixture of uniform ranges.
struct MixtureLengths {
  std::vector<UniformLengths> components;
  std::vector<double> weights;
};

using LengthDistribution = std::variant<UniformLengths, LogNormalLengths, MixtureLengths>;

struct SynthSpec {
  std::size_t count = 1000;
  LengthDistribution n_distribution = UniformLengths{};
  double gamma = 1.0;
  double delta = 0.0;
  double length_noise_sd = 0.0;  ///< tokens
  std::uint64_t seed = 1;
  std::string language_pair = "synthetic";
};

/// Seeded synthetic corpus with m_true = round(gamma*n + delta + noise) >= 1.
Corpus synth_corpus(const SynthSpec& spec);

/// Corpus from a `n\tm_real` TSV file.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

/// Samples from an `n,m,t_ms` CSV file.
std::vector<LatencySample> load_measurements(const std::string& path);
void save_measurements(std::span<const LatencySample> samples, const std::string& path);

/// Latency samples realized by `oracle` over `corpus`, as an offline
/// characterization run would record them.
std::vector<LatencySample> characterize(const DeviceOracle& oracle, const Corpus& corpus);

}  // namespace cnmt
