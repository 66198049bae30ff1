#include "nbafl/csv.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "nbafl/errors.hpp"

namespace nbafl {

std::string format_real17(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path temp = dir / (target.filename().string() + ".tmp." +
                               std::to_string(::getpid()));
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + temp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + temp.string());
  }
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw IoError("cannot rename into place: " + path);
  }
}

std::string render_trace_csv(const RunResult& result) {
  std::ostringstream out;
  out << "round,train_loss,test_loss,test_acc,sigma_uplink,sigma_downlink,"
         "sigma_aggregate,scheduled_k,seed\n";
  for (const RoundTrace& row : result.trace) {
    out << row.round << ',' << format_real17(row.train_loss) << ','
        << format_real17(row.test_loss) << ',' << format_real17(row.test_accuracy) << ','
        << format_real17(row.sigma_uplink) << ',' << format_real17(row.sigma_downlink) << ','
        << format_real17(row.sigma_aggregate) << ',' << row.scheduled.size() << ','
        << result.config.seed << '\n';
  }
  return out.str();
}

std::string render_profile_csv(const GridScan& scan, const std::string& axis) {
  std::ostringstream out;
  out << axis << ",bound_value,regime_flags\n";
  for (const GridPoint& point : scan.points) {
    out << point.x << ',';
    if (point.has_value) out << format_real17(point.value);
    out << ',' << point.flag << '\n';
  }
  return out.str();
}

std::string render_sweep_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "variable,value,seed,final_train_loss,final_test_acc\n";
  for (const SweepCell& cell : cells) {
    out << cell.variable << ',' << cell.value << ',' << cell.seed << ','
        << format_real17(cell.final_train_loss) << ',' << format_real17(cell.final_test_acc)
        << '\n';
  }
  return out.str();
}

std::string render_sweep_summary_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "variable,value,mean_final_train_loss,se_final_train_loss,"
         "mean_final_test_acc,se_final_test_acc,n_seeds\n";
  std::vector<std::string> order;
  for (const SweepCell& cell : cells) {
    bool known = false;
    for (const std::string& v : order) known = known || v == cell.value;
    if (!known) order.push_back(cell.value);
  }
  for (const std::string& value : order) {
    double sum_loss = 0.0, sum_loss_sq = 0.0, sum_acc = 0.0, sum_acc_sq = 0.0;
    int count = 0;
    std::string variable;
    for (const SweepCell& cell : cells) {
      if (cell.value != value) continue;
      variable = cell.variable;
      sum_loss += cell.final_train_loss;
      sum_loss_sq += cell.final_train_loss * cell.final_train_loss;
      sum_acc += cell.final_test_acc;
      sum_acc_sq += cell.final_test_acc * cell.final_test_acc;
      ++count;
    }
    const double n = static_cast<double>(count);
    const double mean_loss = sum_loss / n;
    const double mean_acc = sum_acc / n;
    const auto standard_error = [n](double sum_sq, double mean) {
      if (n < 2.0) return 0.0;
      const double variance = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
      return std::sqrt(variance / n);
    };
    out << variable << ',' << value << ',' << format_real17(mean_loss) << ','
        << format_real17(standard_error(sum_loss_sq, mean_loss)) << ','
        << format_real17(mean_acc) << ',' << format_real17(standard_error(sum_acc_sq, mean_acc))
        << ',' << count << '\n';
  }
  return out.str();
}

}  // namespace nbafl
