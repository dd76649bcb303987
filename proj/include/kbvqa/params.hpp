#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kbvqa/rng.hpp"
#include "kbvqa/tensor.hpp"

namespace kbvqa {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  bool grad_set = false;  // true once a backward pass has written the buffer
  bool trainable = true;
  Tensor m, v;  // Adam moments (trainable entries only)
};

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay is added to the update; false folds it into the gradient
  // as classic L2 before the moment updates.
  bool decoupled_weight_decay = true;
};

// Named trainable parameters plus optimizer state. Iteration is always in
// sorted name order so updates are deterministic.
class ParameterStore {
 public:
  explicit ParameterStore(Precision precision = Precision::f64) : precision_(precision) {}

  Tensor& create(const std::string& name, std::vector<int> shape);
  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), fan_in = last dim
  Tensor& create_uniform(const std::string& name, std::vector<int> shape, Rng& rng);
  // Non-trainable state (e.g. normalization running statistics).
  Tensor& create_buffer(const std::string& name, std::vector<int> shape);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }

  void zero_grad();
  void adam_step(const AdamConfig& cfg);
  int64_t step() const { return step_; }

  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  Precision precision() const { return precision_; }

  std::map<std::string, ParamEntry>& entries() { return entries_; }
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }

  // Checkpoint I/O; round-trips values, trainable flags, optimizer state and
  // the step counter bit-exactly. load() into a non-empty store requires the
  // same parameter names and shapes.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  Tensor& insert(const std::string& name, std::vector<int> shape, bool trainable);

  Precision precision_;
  int64_t step_ = 0;
  std::map<std::string, ParamEntry> entries_;
};

}  // namespace kbvqa
