#include "mapid/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mapid {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

void provenance_line(std::ofstream& f, const std::string& provenance) {
  if (!provenance.empty()) f << "# mapid " << provenance << "\n";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool next_data_line(std::ifstream& f, std::string& line) {
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

void write_trajectory_csv(const std::string& path, const std::vector<StateVec>& traj,
                          const std::string& provenance) {
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  auto f = open_out(path);
  provenance_line(f, provenance);
  f << "t";
  for (std::size_t j = 0; j < traj[0].size(); ++j) f << ",x" << j;
  f << "\n";
  for (std::size_t t = 0; t < traj.size(); ++t) {
    f << t;
    for (double v : traj[t]) f << "," << num(v);
    f << "\n";
  }
}

std::vector<StateVec> read_trajectory_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!next_data_line(f, line)) throw std::runtime_error("empty trajectory file");
  const std::size_t dim = split_csv(line).size() - 1;  // header: t,x0,...
  std::vector<StateVec> traj;
  while (next_data_line(f, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != dim + 1)
      throw std::runtime_error("malformed trajectory row: " + line);
    StateVec x;
    for (std::size_t j = 1; j < cells.size(); ++j) x.push_back(std::stod(cells[j]));
    traj.push_back(std::move(x));
  }
  return traj;
}

void write_pairs_csv(const std::string& path, const Dataset& ds,
                     const std::string& provenance) {
  if (ds.size() == 0) throw std::invalid_argument("empty dataset");
  auto f = open_out(path);
  provenance_line(f, provenance);
  const int n = ds.dim();
  for (int j = 0; j < n; ++j) f << (j ? "," : "") << "x" << j << "_in";
  for (int j = 0; j < n; ++j) f << ",x" << j << "_out";
  f << ",fold\n";
  for (std::size_t m = 0; m < ds.size(); ++m) {
    for (int j = 0; j < n; ++j)
      f << (j ? "," : "") << num(ds.inputs[m][static_cast<std::size_t>(j)]);
    for (int j = 0; j < n; ++j) f << "," << num(ds.targets[m][static_cast<std::size_t>(j)]);
    f << "," << (ds.fold_ids.empty() ? -1 : ds.fold_ids[m]) << "\n";
  }
}

Dataset read_pairs_csv(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  if (!next_data_line(f, line)) throw std::runtime_error("empty dataset file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header.back() != "fold")
    throw std::runtime_error("malformed pairs header: " + line);
  const std::size_t n = (header.size() - 1) / 2;
  if (header.size() != 2 * n + 1)
    throw std::runtime_error("malformed pairs header: " + line);
  Dataset ds;
  bool any_fold = false;
  while (next_data_line(f, line)) {
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw std::runtime_error("malformed pairs row: " + line);
    StateVec in, out;
    for (std::size_t j = 0; j < n; ++j) in.push_back(std::stod(cells[j]));
    for (std::size_t j = 0; j < n; ++j) out.push_back(std::stod(cells[n + j]));
    const int fold = std::stoi(cells.back());
    ds.inputs.push_back(std::move(in));
    ds.targets.push_back(std::move(out));
    ds.fold_ids.push_back(fold);
    if (fold >= 0) any_fold = true;
  }
  if (!any_fold) ds.fold_ids.clear();
  return ds;
}

void write_training_log_csv(const std::string& path, const TrainedModel& model,
                            const TrainConfig& cfg, const std::string& provenance) {
  auto f = open_out(path);
  provenance_line(f, provenance);
  f << "epoch,train_mae,val_mae,l_half,l_poly,l_ops,total,lr\n";
  for (std::size_t i = 0; i < model.loss_history.size(); ++i) {
    const LossBreakdown& l = model.loss_history[i];
    const int epoch = static_cast<int>(i) + 1;
    f << epoch << "," << num(l.mae) << "," << num(model.val_history[i]) << ","
      << num(l.l_half) << "," << num(l.l_poly) << "," << num(l.l_ops) << ","
      << num(l.total) << "," << num(cyclic_lr(epoch - 1, cfg)) << "\n";
  }
}

void write_portrait_csv(const std::string& path, const Portrait& portrait,
                        const std::string& provenance) {
  auto f = open_out(path);
  provenance_line(f, provenance);
  for (std::size_t j = 0; j < portrait.header.size(); ++j)
    f << (j ? "," : "") << portrait.header[j];
  f << "\n";
  for (const auto& row : portrait.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      f << (j ? "," : "");
      if (std::isnan(row[j]))
        f << "nan";
      else
        f << num(row[j]);
    }
    f << "\n";
  }
}

void write_expression_file(const std::string& path, const ExprSystem& sys,
                           const std::string& provenance) {
  auto f = open_out(path);
  provenance_line(f, provenance);
  f << format(sys, exact_format()) << "\n";
}

ExprSystem read_expression_file(const std::string& path) {
  auto f = open_in(path);
  std::string line, text;
  while (next_data_line(f, line)) {
    if (!text.empty()) text += " ";
    text += line;
  }
  if (text.empty()) throw std::runtime_error("empty expression file: " + path);
  return parse_system(text);
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows,
                       const std::string& provenance) {
  auto f = open_out(path);
  provenance_line(f, provenance);
  f << "sigma,expression,val_mae,rrmse,true_rrmse,convergence_epoch\n";
  for (const ResultRow& r : rows)
    f << num(r.sigma) << "," << r.expression << "," << num(r.val_mae) << ","
      << num(r.rrmse) << "," << num(r.true_rrmse) << "," << r.convergence_epoch
      << "\n";
}

}  // namespace mapid
