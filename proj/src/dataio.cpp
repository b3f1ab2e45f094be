#include "symdyn/dataio.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace symdyn::envs {

std::vector<Transition> collect_exploration_dataset(Env& env, int n_traj,
                                                    int traj_len, Rng& rng) {
  if (n_traj < 1 || traj_len < 1)
    throw std::invalid_argument("collect_exploration_dataset: n_traj and traj_len must be >= 1");
  const EnvSpec& sp = env.spec();
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(n_traj) * static_cast<std::size_t>(traj_len));

  for (int traj = 0; traj < n_traj; ++traj) {
    const int hold = 1 + traj % 10;
    VecX obs = env.reset(rng);
    VecX action(sp.action_dim);
    for (int t = 0; t < traj_len; ++t) {
      if (t % hold == 0)
        for (int i = 0; i < sp.action_dim; ++i)
          action(i) = uniform(rng, sp.action_low(i), sp.action_high(i));
      StepResult sr = env.step(action);
      Transition tr;
      tr.obs = obs;
      tr.s = sr.state_before;
      tr.a = action;
      tr.r = sr.reward;
      tr.obs2 = sr.obs;
      tr.s2 = sr.state_after;
      tr.done = false;  // time-limit truncations bootstrap as non-terminal
      tr.src = Source::Env;
      out.push_back(std::move(tr));
      obs = sr.obs;
      if (sr.done) obs = env.reset(rng);
    }
  }
  return out;
}

}  // namespace symdyn::envs

namespace symdyn::dataio {

std::string format_real(real v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string transitions_to_csv(const envs::EnvSpec& spec,
                               const std::vector<Transition>& transitions) {
  std::string out;
  for (const auto& n : spec.state_names) { out += n; out += ','; }
  for (const auto& n : spec.action_names) { out += n; out += ','; }
  for (const auto& n : spec.state_names) { out += "next_"; out += n; out += ','; }
  out += "reward,done\n";
  for (const Transition& tr : transitions) {
    for (Eigen::Index i = 0; i < tr.s.size(); ++i) { out += format_real(tr.s(i)); out += ','; }
    for (Eigen::Index i = 0; i < tr.a.size(); ++i) { out += format_real(tr.a(i)); out += ','; }
    for (Eigen::Index i = 0; i < tr.s2.size(); ++i) { out += format_real(tr.s2(i)); out += ','; }
    out += format_real(tr.r);
    out += ',';
    out += tr.done ? '1' : '0';
    out += '\n';
  }
  return out;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Csv csv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (line_no == 1) {
      csv.header = std::move(cells);
      continue;
    }
    if (cells.size() != csv.header.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(csv.header.size()) +
                               " columns, got " + std::to_string(cells.size()));
    std::vector<real> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      real v = 0.0;
      const auto res =
          std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (res.ec != std::errc{} || res.ptr != cells[c].data() + cells[c].size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": column " + std::to_string(c + 1) +
                                 " ('" + csv.header[c] + "'): not a number: '" +
                                 cells[c] + "'");
      row[c] = v;
    }
    csv.rows.push_back(std::move(row));
  }
  if (csv.header.empty()) throw std::runtime_error(path + ": empty file");
  return csv;
}

fitopt::Dataset dataset_from_csv(const Csv& csv, const std::string& target) {
  int target_col = -1;
  std::vector<int> input_cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    const std::string& h = csv.header[c];
    if (h == target) {
      target_col = static_cast<int>(c);
      continue;
    }
    if (h.rfind("next_", 0) == 0 || h == "reward" || h == "done") continue;
    input_cols.push_back(static_cast<int>(c));
  }
  if (target_col < 0)
    throw std::runtime_error("target column '" + target + "' not found");
  if (input_cols.empty()) throw std::runtime_error("no input columns");

  fitopt::Dataset data;
  data.X.resize(static_cast<Eigen::Index>(csv.rows.size()),
                static_cast<Eigen::Index>(input_cols.size()));
  data.y.resize(static_cast<Eigen::Index>(csv.rows.size()));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t c = 0; c < input_cols.size(); ++c)
      data.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          csv.rows[r][static_cast<std::size_t>(input_cols[c])];
    data.y(static_cast<Eigen::Index>(r)) =
        csv.rows[r][static_cast<std::size_t>(target_col)];
  }
  return data;
}

std::vector<Transition> transitions_from_csv(const envs::EnvSpec& spec,
                                             const Csv& csv) {
  const std::size_t sd = static_cast<std::size_t>(spec.state_dim);
  const std::size_t ad = static_cast<std::size_t>(spec.action_dim);
  if (csv.header.size() != 2 * sd + ad + 2)
    throw std::runtime_error("CSV does not match environment '" + spec.name + "'");
  std::vector<Transition> out;
  out.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    Transition tr;
    tr.s = Eigen::Map<const VecX>(row.data(), static_cast<Eigen::Index>(sd));
    tr.a = Eigen::Map<const VecX>(row.data() + sd, static_cast<Eigen::Index>(ad));
    tr.s2 = Eigen::Map<const VecX>(row.data() + sd + ad, static_cast<Eigen::Index>(sd));
    tr.r = row[2 * sd + ad];
    tr.done = row[2 * sd + ad + 1] != 0.0;
    tr.src = Source::Env;
    out.push_back(std::move(tr));
  }
  return out;
}

void atomic_write(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
  }
  fs::rename(tmp, target);
}

}  // namespace symdyn::dataio
