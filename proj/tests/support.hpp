#pragma once

// Shared by the unit tests and the acceptance runner: fixture access, brute-force
// oracles written independently of the library, and a scripted chat endpoint.

#include <httplib.h>

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef ADP_FIXTURE_DIR
#error "ADP_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(ADP_FIXTURE_DIR) / name; }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("adp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Solves Phi * omega = rho with a dense LU factorisation, no use of the DFT structure.
inline Eigen::VectorXcd brute_force_inverse(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& rho) {
  return phi.fullPivLu().solve(rho);
}

struct OracleMetrics {
  double accuracy = 0;
  double macro_f1 = 0;
};

// Confusion-matrix computation for one episode. `pred` entries equal to "" are abstentions.
inline OracleMetrics oracle_metrics(const std::vector<std::string>& classes, const std::vector<std::string>& truth,
                                    const std::vector<std::string>& pred) {
  const std::size_t n = classes.size();
  std::vector<std::vector<long>> cm(n, std::vector<long>(n + 1, 0));
  auto idx = [&](const std::string& c) -> std::size_t {
    for (std::size_t i = 0; i < n; ++i)
      if (classes[i] == c) return i;
    return n;
  };
  long correct = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    cm[idx(truth[q])][idx(pred[q])] += 1;
    if (pred[q] == truth[q]) ++correct;
  }
  double f1_sum = 0;
  int counted = 0;
  for (std::size_t c = 0; c < n; ++c) {
    long row = 0, col = 0;
    for (std::size_t j = 0; j <= n; ++j) row += cm[c][j];
    for (std::size_t i = 0; i < n; ++i) col += cm[i][c];
    if (row == 0) continue;
    const double tp = static_cast<double>(cm[c][c]);
    const double p = col ? tp / static_cast<double>(col) : 0.0;
    const double r = tp / static_cast<double>(row);
    f1_sum += (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
    ++counted;
  }
  return {100.0 * static_cast<double>(correct) / static_cast<double>(truth.size()),
          counted ? 100.0 * f1_sum / counted : 0.0};
}

// Lowest within-cluster sum of squares over every 2-partition of the rows of x (n <= 20).
inline std::pair<double, std::vector<int>> best_two_partition(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_lab;
  for (unsigned mask = 1; mask < (1u << (n - 1)); ++mask) {  // row n-1 fixed to side 0
    std::vector<int> lab(n);
    for (int i = 0; i < n; ++i) lab[i] = (mask >> i) & 1u;
    double cost = 0;
    for (int side = 0; side < 2; ++side) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
      int cnt = 0;
      for (int i = 0; i < n; ++i)
        if (lab[i] == side) mean += x.row(i), ++cnt;
      mean /= cnt;
      for (int i = 0; i < n; ++i)
        if (lab[i] == side) cost += (x.row(i) - mean).squaredNorm();
    }
    if (cost < best) best = cost, best_lab = lab;
  }
  return {best, best_lab};
}

// Chat-completion endpoint on 127.0.0.1 driven by a script callback.
class FakeChatServer {
 public:
  using Script = std::function<std::pair<int, std::string>(std::size_t call, const std::string& prompt)>;

  explicit FakeChatServer(Script script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t call;
      {
        std::lock_guard lock(m_);
        call = arrivals_.size();
        arrivals_.push_back(std::chrono::steady_clock::now());
        ++in_flight_;
        max_in_flight_ = std::max(max_in_flight_, in_flight_);
      }
      const auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body["messages"][0]["content"].get<std::string>();
      auto [status, content] = script_(call, prompt);
      if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
      res.status = status;
      if (status == 200) {
        const nlohmann::json out = {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
        res.set_content(out.dump(), "application/json");
      } else {
        res.set_content(R"({"error":"scripted"})", "application/json");
      }
      std::lock_guard lock(m_);
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::size_t calls() const {
    std::lock_guard lock(m_);
    return arrivals_.size();
  }
  std::vector<std::chrono::steady_clock::time_point> arrivals() const {
    std::lock_guard lock(m_);
    return arrivals_;
  }
  int max_in_flight() const {
    std::lock_guard lock(m_);
    return max_in_flight_;
  }
  void set_delay(std::chrono::milliseconds d) { delay_ = d; }

 private:
  Script script_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex m_;
  std::vector<std::chrono::steady_clock::time_point> arrivals_;
  int in_flight_ = 0, max_in_flight_ = 0;
  std::chrono::milliseconds delay_{0};
};

// Deterministic stand-in for a model: picks a candidate class by hashing the prompt.
inline std::string hashed_answer(const std::string& prompt) {
  const std::string marker = "Candidate target classes include: ";
  const auto start = prompt.find(marker);
  std::vector<std::string> names;
  if (start != std::string::npos) {
    const auto end = prompt.find('\n', start);
    const std::string list = prompt.substr(start + marker.size(), end - start - marker.size());
    std::size_t p = 0;
    while ((p = list.find('\'', p)) != std::string::npos) {
      const auto q = list.find('\'', p + 1);
      names.push_back(list.substr(p + 1, q - p - 1));
      p = q + 1;
    }
  }
  if (names.empty()) return "I cannot tell.";
  const auto h = std::hash<std::string>{}(prompt);
  return "Predicted Target Class: " + names[h % names.size()] + "\nReasons: scripted.";
}

}  // namespace testsupport
