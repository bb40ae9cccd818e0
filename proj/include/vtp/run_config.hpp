#pragma once

#include <map>
#include <string>

#include "vtp/model.hpp"
#include "vtp/pipeline.hpp"
#include "vtp/quantizer.hpp"

namespace vtp {

/// Flat key=value run configuration ('#' comments, UTF-8). Every key has a
/// default; unknown keys are errors; the resolved form echoes every value so
/// a dump can reproduce the run byte for byte.
class RunConfig {
 public:
  RunConfig();  // defaults only

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  std::string resolved_dump() const;  // sorted key=value lines

  std::uint64_t seed() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  CropConfig crop_config() const;
  ToyQuantizerConfig quantizer_config() const;

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vtp
