#ifndef PETPRIOR_TEST_SUPPORT_HPP
#define PETPRIOR_TEST_SUPPORT_HPP

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "petprior/error.hpp"
#include "petprior/volume.hpp"

namespace petprior::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("petprior_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline Volume3D make_volume(GridSize g, Modality m, const Volume3D::Array& data, Spacing sp = Spacing::Ones()) {
  return Volume3D(g, sp, Origin::Zero(), m, data);
}

inline Volume3D random_mask(GridSize g, double p, std::mt19937_64& rng, Spacing sp = Spacing::Ones()) {
  std::bernoulli_distribution b(p);
  Volume3D::Array a(g.count());
  for (Index i = 0; i < a.size(); ++i) a[i] = b(rng) ? 1.0f : 0.0f;
  return make_volume(g, Modality::kLabel, a, sp);
}

}  // namespace petprior::testing

#define EXPECT_ERROR_CODE(stmt, expected)                                        \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected petprior::Error " #expected;                    \
    } catch (const ::petprior::Error& e) {                                       \
      EXPECT_EQ(e.code(), expected) << e.what();                                 \
    }                                                                            \
  } while (0)

#endif  // PETPRIOR_TEST_SUPPORT_HPP
