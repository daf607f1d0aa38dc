#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "eos/tasks.hpp"
#include "test_util.hpp"

using namespace eos;

TEST_CASE("chebyshev degree 1 targets equal inputs") {
  const auto d = chebyshev_dataset(1);
  CHECK(d.n() == 20);
  CHECK((d.targets - d.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.features(0, 0) == doctest::Approx(-1.0));
  CHECK(d.features(19, 0) == doctest::Approx(1.0));
}

TEST_CASE("chebyshev endpoint and recurrence values") {
  CHECK(chebyshev_value(3, 1.0) == doctest::Approx(1.0));
  // T2(0) = -1, T3(0) = 0, T4(0) = 1 via the recurrence.
  CHECK(chebyshev_value(2, 0.0) == doctest::Approx(-1.0));
  CHECK(chebyshev_value(3, 0.0) == doctest::Approx(0.0));
  CHECK(chebyshev_value(4, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("chebyshev targets stay inside [-1, 1]") {
  for (int degree = 1; degree <= 9; ++degree) {
    const auto d = chebyshev_dataset(degree);
    CHECK(d.targets.maxCoeff() <= 1.0 + 1e-12);
    CHECK(d.targets.minCoeff() >= -1.0 - 1e-12);
  }
}

TEST_CASE("deep linear dataset is whitened and reproducible") {
  const auto d = deep_linear_dataset(50, 50, 3);
  const Matrix gram =
      d.features.transpose() * d.features / static_cast<double>(d.n());
  CHECK((gram - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-10);

  const auto again = deep_linear_dataset(50, 50, 3);
  CHECK((again.targets - d.targets).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(deep_linear_dataset(10, 20, 0), std::invalid_argument);
}

TEST_CASE("blobs are deterministic and balanced") {
  const auto a = blobs_dataset(100, 8, 4, 3.0, 9);
  const auto b = blobs_dataset(100, 8, 4, 3.0, 9);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.labels == b.labels);
  int counts[4] = {0, 0, 0, 0};
  for (int y : a.labels) ++counts[y];
  for (int c : counts) CHECK(c == 25);
}

namespace {

// Least-squares one-hot readout; accuracy of the argmax over classes.
double linear_probe_accuracy(const Dataset& d) {
  Matrix x(d.n(), d.feature_dim() + 1);
  x << d.features, Matrix::Ones(d.n(), 1);
  const Matrix w = (x.transpose() * x + 1e-8 * Matrix::Identity(x.cols(), x.cols()))
                       .ldlt()
                       .solve(x.transpose() * d.targets);
  const Matrix scores = x * w;
  Index hits = 0;
  for (Index i = 0; i < scores.rows(); ++i) {
    Index argmax = 0;
    scores.row(i).maxCoeff(&argmax);
    if (argmax == d.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

}  // namespace

TEST_CASE("separated blobs are linearly separable, overlapping ones are not") {
  const auto separated = blobs_dataset(400, 16, 4, 10.0, 5);
  CHECK(linear_probe_accuracy(separated) > 0.95);

  const auto collapsed = blobs_dataset(400, 16, 4, 0.0, 5);
  CHECK(linear_probe_accuracy(collapsed) < 0.5);  // chance is 0.25
}

TEST_CASE("dataset csv dump carries provenance, rows and labels") {
  const auto d = blobs_dataset(5, 2, 2, 1.0, 3);
  std::ostringstream out;
  write_dataset_csv(out, d);
  const std::string csv = out.str();
  CHECK(csv.rfind("# blobs(", 0) == 0);
  CHECK(csv.find("x1,x2,y1,y2,label") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);  // comment+header+5 rows
}

TEST_CASE("head_subset keeps the leading rows of every field") {
  const auto full = blobs_dataset(40, 6, 4, 2.0, 1);
  const auto sub = head_subset(full, 12);
  CHECK(sub.n() == 12);
  CHECK((sub.features - full.features.topRows(12)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sub.labels == std::vector<int>(full.labels.begin(), full.labels.begin() + 12));
  CHECK_THROWS_AS(head_subset(full, 0), std::invalid_argument);
  CHECK_THROWS_AS(head_subset(full, 41), std::invalid_argument);
}

TEST_CASE("cifar loader parses records and standardizes channels") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "eos_test_cifar.bin";
  constexpr int kRecords = 12;
  {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < kRecords; ++i) {
      unsigned char label = static_cast<unsigned char>(i % 10);
      out.put(static_cast<char>(label));
      for (int ch = 0; ch < 3; ++ch) {
        for (int p = 0; p < 1024; ++p) {
          out.put(static_cast<char>((i * 37 + ch * 11 + p) % 256));
        }
      }
    }
  }

  ChannelStats stats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};
  const auto d = load_cifar_subset(path.string(), 10, stats);
  CHECK(d.n() == 10);
  CHECK(d.feature_dim() == 3072);
  for (int i = 0; i < 10; ++i) CHECK(d.labels[i] == i % 10);
  // First pixel of the first record is byte value 0 -> (0 - 0.5) / 0.25.
  CHECK(d.features(0, 0) == doctest::Approx((0.0 - 0.5) / 0.25));

  CHECK_THROWS(load_cifar_subset(path.string(), kRecords + 1, stats));

  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.put('x');  // corrupt the record framing
  }
  CHECK_THROWS(load_cifar_subset(path.string(), 1, stats));
  fs::remove(path);
}
