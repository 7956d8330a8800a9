#include "swiptnet/channel.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "swiptnet/rng.hpp"

namespace swiptnet {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(std::string("dataset read: truncated ") + what);
  return v;
}

void put_matrix(std::ostream& os, const CMatrix& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      put(os, m(r, c).real());
      put(os, m(r, c).imag());
    }
}

CMatrix get_matrix(std::istream& is, Index rows, Index cols, const char* what) {
  CMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const double re = get<double>(is, what);
      const double im = get<double>(is, what);
      m(r, c) = Complex(re, im);
    }
  return m;
}

}  // namespace

void Dataset::validate() const {
  if (n_tx < 1 || n_ue < 1) throw std::runtime_error("dataset: invalid dimensions");
  for (const ChannelSample& s : samples)
    if (s.rows() != n_ue || s.cols() != n_tx)
      throw std::runtime_error("dataset: sample shape does not match header");
  if (!labels.empty() && labels.size() != samples.size())
    throw std::runtime_error("dataset: labels not aligned with samples");
}

ChannelSample generate_sample(const SystemConfig& cfg, uint64_t seed, uint64_t index) {
  const double sigma = std::sqrt(cfg.channel_variance() / 2.0);  // per real component
  Prng rng(derive_seed(seed, index));
  ChannelSample h(cfg.n_ue, cfg.n_tx);
  for (int r = 0; r < cfg.n_ue; ++r)
    for (int c = 0; c < cfg.n_tx; ++c)
      h(r, c) = Complex(sigma * rng.gaussian(), sigma * rng.gaussian());
  return h;
}

Dataset generate_dataset(const SystemConfig& cfg, uint64_t seed, size_t count) {
  cfg.validate();
  Dataset ds;
  ds.n_tx = cfg.n_tx;
  ds.n_ue = cfg.n_ue;
  ds.samples.reserve(count);
  for (size_t i = 0; i < count; ++i) ds.samples.push_back(generate_sample(cfg, seed, i));
  return ds;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  ds.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset write: cannot open " + path);
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<uint32_t>(ds.n_tx));
  put(os, static_cast<uint32_t>(ds.n_ue));
  put(os, static_cast<uint64_t>(ds.samples.size()));
  put(os, static_cast<uint8_t>(ds.labeled() ? 1 : 0));
  for (const ChannelSample& s : ds.samples) put_matrix(os, s);
  if (ds.labeled()) {
    put(os, static_cast<uint8_t>(ds.label_receiver));
    for (const OracleLabel& l : ds.labels) {
      put(os, l.sum_rate);
      put(os, static_cast<uint8_t>(l.converged ? 1 : 0));
      put(os, l.restarts_used);
      put_matrix(os, l.solution.w);
      for (Index i = 0; i < l.solution.ratios.size(); ++i) put(os, l.solution.ratios(i));
    }
  }
  if (!os) throw std::runtime_error("dataset write: failed writing " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset read: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("dataset read: bad magic in " + path);
  const auto version = get<uint32_t>(is, "version");
  if (version != kVersion)
    throw std::runtime_error("dataset read: unsupported version " + std::to_string(version));
  Dataset ds;
  ds.n_tx = static_cast<int>(get<uint32_t>(is, "n_tx"));
  ds.n_ue = static_cast<int>(get<uint32_t>(is, "n_ue"));
  if (ds.n_tx < 1 || ds.n_ue < 1) throw std::runtime_error("dataset read: invalid dimensions");
  const auto count = get<uint64_t>(is, "count");
  const auto labels_flag = get<uint8_t>(is, "labels flag");
  ds.samples.reserve(count);
  for (uint64_t i = 0; i < count; ++i)
    ds.samples.push_back(get_matrix(is, ds.n_ue, ds.n_tx, "sample"));
  if (labels_flag == 1) {
    ds.label_receiver = static_cast<Receiver>(get<uint8_t>(is, "label receiver"));
    ds.labels.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
      OracleLabel l;
      l.sum_rate = get<double>(is, "label sum rate");
      l.converged = get<uint8_t>(is, "label converged") != 0;
      l.restarts_used = get<uint32_t>(is, "label restarts");
      l.solution.w = get_matrix(is, ds.n_ue, ds.n_tx, "label beamforming");
      l.solution.ratios.resize(ds.n_ue);
      for (int k = 0; k < ds.n_ue; ++k) l.solution.ratios(k) = get<double>(is, "label ratio");
      l.solution.receiver = ds.label_receiver;
      ds.labels.push_back(std::move(l));
    }
  }
  // trailing garbage means the header did not describe the payload
  is.peek();
  if (!is.eof()) throw std::runtime_error("dataset read: trailing bytes in " + path);
  ds.validate();
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio) {
  if (ds.samples.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("split_dataset: ratio must be in (0,1)");
  const size_t n_test = static_cast<size_t>(ratio * double(ds.samples.size()));
  Dataset test, val;
  test.n_tx = val.n_tx = ds.n_tx;
  test.n_ue = val.n_ue = ds.n_ue;
  test.label_receiver = val.label_receiver = ds.label_receiver;
  test.samples.assign(ds.samples.begin(), ds.samples.begin() + n_test);
  val.samples.assign(ds.samples.begin() + n_test, ds.samples.end());
  if (ds.labeled()) {
    test.labels.assign(ds.labels.begin(), ds.labels.begin() + n_test);
    val.labels.assign(ds.labels.begin() + n_test, ds.labels.end());
  }
  return {std::move(test), std::move(val)};
}

uint64_t file_fingerprint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fingerprint: cannot open " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

uint64_t SystemConfig::fingerprint() const {
  // FNV-1a over the canonical field sequence
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&n_tx, sizeof(n_tx));
  mix(&n_ue, sizeof(n_ue));
  mix(&p_max_w, sizeof(p_max_w));
  mix(&r_req, sizeof(r_req));
  mix(&gamma_req_w, sizeof(gamma_req_w));
  mix(&sigma_s2_w, sizeof(sigma_s2_w));
  mix(&pl_db, sizeof(pl_db));
  return h;
}

}  // namespace swiptnet
