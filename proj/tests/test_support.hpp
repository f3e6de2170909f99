#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/harness.hpp"

namespace slotpath::testing {

inline ModelWeights random_model(ModelShape shape, std::mt19937_64& rng) {
  std::vector<std::uint8_t> w1(shape.hidden_width * shape.row_bytes());
  for (auto& b : w1) b = static_cast<std::uint8_t>(rng());
  std::uniform_int_distribution<int> bias(-16, 16);
  std::uniform_real_distribution<float> w(-1.0f, 1.0f);
  std::vector<std::int8_t> b1(shape.hidden_width);
  for (auto& b : b1) b = static_cast<std::int8_t>(bias(rng));
  std::vector<float> w2(shape.hidden_width);
  for (auto& x : w2) x = w(rng);
  return ModelWeights(shape, std::move(w1), std::move(b1), std::move(w2), w(rng));
}

inline std::vector<std::uint8_t> random_bytes(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("slotpath-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace slotpath::testing
