#include "catapult/dataset_io.hpp"

#include "catapult/io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <thread>

namespace catapult {

namespace io {

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw std::runtime_error("format_double: to_chars failed");
  }
  return std::string(buf.data(), end);
}

std::string format_optional(const std::optional<double>& value) { return value ? format_double(*value) : ""; }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "_" +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace io

namespace models {

std::string dataset_csv(const RegressionDataset& data) {
  std::string out;
  for (Eigen::Index j = 0; j < data.d(); ++j) {
    out += "x_" + std::to_string(j + 1) + ",";
  }
  out += "y\n";
  for (Eigen::Index n = 0; n < data.n(); ++n) {
    for (Eigen::Index j = 0; j < data.d(); ++j) {
      out += io::format_double(data.inputs(n, j));
      out += ',';
    }
    out += io::format_double(data.targets(n));
    out += '\n';
  }
  return out;
}

nlohmann::json dataset_sidecar(const RegressionDataset& data) {
  return {{"n", data.n()},
          {"d", data.d()},
          {"sigma2", data.sigma2},
          {"mu", std::vector<double>(data.mu.data(), data.mu.data() + data.mu.size())},
          {"k", data.k},
          {"seed", data.seed}};
}

void write_dataset(const RegressionDataset& data, const std::filesystem::path& csv_path) {
  io::write_file_atomic(csv_path, dataset_csv(data));
  std::filesystem::path sidecar = csv_path;
  sidecar += ".json";
  io::write_file_atomic(sidecar, dataset_sidecar(data).dump(2) + "\n");
}

RegressionDataset read_dataset(const std::filesystem::path& csv_path) {
  std::filesystem::path sidecar_path = csv_path;
  sidecar_path += ".json";
  const auto meta = nlohmann::json::parse(io::read_file(sidecar_path));
  const int n = meta.at("n").get<int>();
  const int d = meta.at("d").get<int>();

  RegressionDataset data;
  data.sigma2 = meta.at("sigma2").get<double>();
  data.k = meta.at("k").get<int>();
  data.seed = meta.at("seed").get<std::uint64_t>();
  const auto mu = meta.at("mu").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != d) {
    throw std::runtime_error(sidecar_path.string() + ": mu has wrong length");
  }
  data.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), d);
  data.w_star = Eigen::VectorXd::Zero(d);
  data.w_star.head(data.k).setConstant(1.0 / std::sqrt(static_cast<double>(data.k)));
  data.inputs.resize(n, d);
  data.targets.resize(n);

  std::istringstream in(io::read_file(csv_path));
  std::string line;
  std::getline(in, line);  // header
  for (int row = 0; row < n; ++row) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(csv_path.string() + ": expected " + std::to_string(n) + " rows");
    }
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int col = 0; col <= d; ++col) {
      double value = 0.0;
      const auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc{}) {
        throw std::runtime_error(csv_path.string() + ": bad number at row " + std::to_string(row + 1));
      }
      if (col < d) {
        data.inputs(row, col) = value;
      } else {
        data.targets(row) = value;
      }
      p = next + 1;
    }
  }
  return data;
}

}  // namespace models

}  // namespace catapult
