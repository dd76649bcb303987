#include "kbvqa/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kbvqa {

namespace {
constexpr char kMagic[8] = {'K', 'V', 'Q', 'A', 'C', 'K', '0', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: unexpected end of file");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_raw<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  uint32_t n = read_raw<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: unexpected end of file");
  return s;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_raw<uint32_t>(os, static_cast<uint32_t>(t.shape.size()));
  for (int d : t.shape) write_raw<int32_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  uint32_t nd = read_raw<uint32_t>(is);
  std::vector<int> shape(nd);
  for (uint32_t i = 0; i < nd; ++i) shape[i] = read_raw<int32_t>(is);
  Tensor t;
  t.shape = shape;
  t.data.resize(static_cast<size_t>(shape_numel(shape)));
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!is) throw std::runtime_error("checkpoint: unexpected end of file");
  return t;
}
}  // namespace

Tensor& ParameterStore::insert(const std::string& name, std::vector<int> shape, bool trainable) {
  if (entries_.count(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  ParamEntry e;
  e.value = Tensor::zeros(shape);
  e.grad = Tensor::zeros(shape);
  e.trainable = trainable;
  if (trainable) {
    e.m = Tensor::zeros(shape);
    e.v = Tensor::zeros(shape);
  }
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

Tensor& ParameterStore::create(const std::string& name, std::vector<int> shape) {
  return insert(name, std::move(shape), true);
}

Tensor& ParameterStore::create_uniform(const std::string& name, std::vector<int> shape, Rng& rng) {
  Tensor& t = insert(name, shape, true);
  int fan_in = shape.back();
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : t.data) x = apply_precision(rng.uniform(-bound, bound), precision_);
  return t;
}

Tensor& ParameterStore::create_buffer(const std::string& name, std::vector<int> shape) {
  return insert(name, std::move(shape), false);
}

ParamEntry& ParameterStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

const ParamEntry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [name, e] : entries_) {
    e.grad.fill(0.0);
    e.grad_set = false;
  }
}

void ParameterStore::adam_step(const AdamConfig& cfg) {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    if (!e.grad_set) throw std::runtime_error("adam_step: missing gradient for parameter '" + name + "'");
    for (size_t i = 0; i < e.value.data.size(); ++i) {
      double g = e.grad.data[i];
      if (!cfg.decoupled_weight_decay) g += cfg.weight_decay * e.value.data[i];
      e.m.data[i] = cfg.beta1 * e.m.data[i] + (1.0 - cfg.beta1) * g;
      e.v.data[i] = cfg.beta2 * e.v.data[i] + (1.0 - cfg.beta2) * g * g;
      double m_hat = e.m.data[i] / bc1;
      double v_hat = e.v.data[i] / bc2;
      double update = m_hat / (std::sqrt(v_hat) + cfg.eps);
      if (cfg.decoupled_weight_decay) update += cfg.weight_decay * e.value.data[i];
      e.value.data[i] = apply_precision(e.value.data[i] - cfg.lr * update, precision_);
    }
  }
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_raw<uint64_t>(os, entries_.size());
  for (const auto& [name, e] : entries_) {
    write_string(os, name);
    write_raw<uint8_t>(os, e.trainable ? 1 : 0);
    write_tensor(os, e.value);
  }
  write_raw<uint8_t>(os, 1);  // optimizer state present
  write_raw<int64_t>(os, step_);
  for (const auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    write_tensor(os, e.m);
    write_tensor(os, e.v);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void ParameterStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad header): " + path);
  uint64_t n = read_raw<uint64_t>(is);
  bool fresh = entries_.empty();
  if (!fresh && n != entries_.size())
    throw std::runtime_error("checkpoint has " + std::to_string(n) + " parameters, store has " +
                             std::to_string(entries_.size()));
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(is);
    bool trainable = read_raw<uint8_t>(is) != 0;
    Tensor value = read_tensor(is);
    if (fresh) {
      insert(name, value.shape, trainable);
    } else {
      if (!contains(name)) throw std::runtime_error("checkpoint parameter '" + name + "' not in store");
      if (entry(name).value.shape != value.shape)
        throw std::runtime_error("shape mismatch for '" + name + "': checkpoint " + value.shape_str() +
                                 " vs store " + entry(name).value.shape_str());
    }
    ParamEntry& e = entry(name);
    e.trainable = trainable;
    e.value = std::move(value);
    if (e.trainable && e.m.data.empty()) {
      e.m = Tensor::zeros(e.value.shape);
      e.v = Tensor::zeros(e.value.shape);
    }
  }
  uint8_t has_opt = read_raw<uint8_t>(is);
  if (has_opt) {
    step_ = read_raw<int64_t>(is);
    for (auto& [name, e] : entries_) {
      if (!e.trainable) continue;
      e.m = read_tensor(is);
      e.v = read_tensor(is);
    }
  }
}

}  // namespace kbvqa
