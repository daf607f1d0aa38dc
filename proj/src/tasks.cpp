#include "eos/tasks.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace eos {

void Dataset::validate() const {
  if (features.rows() < 1) throw std::invalid_argument("dataset is empty");
  if (targets.rows() != features.rows()) {
    throw std::invalid_argument("dataset: feature/target row counts differ");
  }
  if (kind == Kind::classification &&
      static_cast<Index>(labels.size()) != features.rows()) {
    throw std::invalid_argument("dataset: labels missing for classification");
  }
}

double chebyshev_value(int degree, double x) {
  if (degree == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < degree; ++k) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

Dataset chebyshev_dataset(int degree) {
  if (degree < 1) throw std::invalid_argument("chebyshev degree must be >= 1");
  constexpr int n = 20;
  Dataset d;
  d.kind = Dataset::Kind::regression;
  d.features.resize(n, 1);
  d.targets.resize(n, 1);
  for (int j = 0; j < n; ++j) {
    const double x = -1.0 + 2.0 * j / (n - 1);
    d.features(j, 0) = x;
    d.targets(j, 0) = chebyshev_value(degree, x);
  }
  d.provenance = "chebyshev(degree=" + std::to_string(degree) + ")";
  return d;
}

Dataset deep_linear_dataset(int n, int d, std::uint64_t seed) {
  if (n < d) throw std::invalid_argument("deep_linear_dataset needs n >= d");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, d);
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = gauss(rng);

  Dataset out;
  out.kind = Dataset::Kind::regression;
  out.features = std::sqrt(static_cast<double>(n)) * q;
  out.targets = out.features * a.transpose();
  out.provenance = "deep_linear(n=" + std::to_string(n) +
                   ",d=" + std::to_string(d) + ",seed=" + std::to_string(seed) +
                   ")";
  return out;
}

Dataset blobs_dataset(int n, int d, int classes, double separation,
                      std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("blobs need classes >= 2");
  if (n < classes) throw std::invalid_argument("blobs need n >= classes");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix centers(classes, d);
  for (int c = 0; c < classes; ++c) {
    Vector dir(d);
    for (Index j = 0; j < d; ++j) dir(j) = gauss(rng);
    centers.row(c) = separation * dir.normalized().transpose();
  }

  Dataset out;
  out.kind = Dataset::Kind::classification;
  out.features.resize(n, d);
  out.targets = Matrix::Zero(n, classes);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    out.labels[i] = label;
    for (Index j = 0; j < d; ++j) {
      out.features(i, j) = centers(label, j) + gauss(rng);
    }
    out.targets(i, label) = 1.0;
  }
  std::ostringstream prov;
  prov << "blobs(n=" << n << ",d=" << d << ",classes=" << classes
       << ",separation=" << separation << ",seed=" << seed << ")";
  out.provenance = prov.str();
  return out;
}

Dataset load_cifar_subset(const std::string& path, int count,
                          const ChannelStats& stats) {
  constexpr int kRecordBytes = 3073;  // 1 label byte + 3 * 1024 pixel bytes
  constexpr int kPixelsPerChannel = 1024;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CIFAR batch: " + path);
  in.seekg(0, std::ios::end);
  const std::int64_t bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes <= 0 || bytes % kRecordBytes != 0) {
    throw std::runtime_error("malformed CIFAR batch (size not a multiple of 3073): " + path);
  }
  const std::int64_t available = bytes / kRecordBytes;
  if (count < 1 || count > available) {
    throw std::runtime_error("requested " + std::to_string(count) +
                             " CIFAR records, file holds " +
                             std::to_string(available));
  }

  Dataset out;
  out.kind = Dataset::Kind::classification;
  out.features.resize(count, 3 * kPixelsPerChannel);
  out.targets = Matrix::Zero(count, 10);
  out.labels.resize(count);

  std::vector<unsigned char> record(kRecordBytes);
  for (int i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(record.data()), kRecordBytes);
    if (!in) throw std::runtime_error("short read in CIFAR batch: " + path);
    const int label = record[0];
    if (label > 9) throw std::runtime_error("CIFAR label byte out of range");
    out.labels[i] = label;
    out.targets(i, label) = 1.0;
    for (int ch = 0; ch < 3; ++ch) {
      for (int p = 0; p < kPixelsPerChannel; ++p) {
        const double raw = record[1 + ch * kPixelsPerChannel + p] / 255.0;
        out.features(i, ch * kPixelsPerChannel + p) =
            (raw - stats.mean[ch]) / stats.stddev[ch];
      }
    }
  }
  out.provenance = "cifar10(path=" + path + ",count=" + std::to_string(count) + ")";
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  out << "# " << data.provenance << "\n";
  for (Index j = 0; j < data.feature_dim(); ++j) out << "x" << j + 1 << ",";
  for (Index j = 0; j < data.target_dim(); ++j) out << "y" << j + 1 << ",";
  out << "label\n";
  char buf[40];
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.feature_dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
      out << buf << ",";
    }
    for (Index j = 0; j < data.target_dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.targets(i, j));
      out << buf << ",";
    }
    if (!data.labels.empty()) out << data.labels[i];
    out << "\n";
  }
}

Dataset head_subset(const Dataset& data, Index count) {
  if (count < 1 || count > data.n()) {
    throw std::invalid_argument("head_subset: count out of range");
  }
  Dataset out;
  out.kind = data.kind;
  out.features = data.features.topRows(count);
  out.targets = data.targets.topRows(count);
  if (!data.labels.empty()) {
    out.labels.assign(data.labels.begin(), data.labels.begin() + count);
  }
  out.provenance = data.provenance + "[:" + std::to_string(count) + "]";
  return out;
}

}  // namespace eos
