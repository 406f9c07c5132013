#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("deepsom_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

/// MNIST directory configured at build time, overridable by DEEPSOM_MNIST_DIR.
inline std::filesystem::path mnist_dir() {
  if (const char* env = std::getenv("DEEPSOM_MNIST_DIR"); env != nullptr && *env != '\0') return env;
  return DEEPSOM_MNIST_DIR;
}

inline bool have_mnist() {
  const auto dir = mnist_dir();
  for (const char* stem : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                           "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}) {
    if (!std::filesystem::exists(dir / stem) &&
        !std::filesystem::exists(dir / (std::string(stem) + ".gz"))) {
      return false;
    }
  }
  return true;
}

}  // namespace testing_support
