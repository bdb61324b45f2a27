#include "atmarl/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace atmarl::checkpoint {
namespace {

std::string shape_text(long rows, long cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

double parse_value(const std::string& token, const std::string& block) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) throw CheckpointError("bad value '" + token + "' in block " + block);
  return v;
}

std::string system_prefix(agents::System s) {
  return std::string("qtable.") + std::string(agents::to_string(s)) + ".";
}

}  // namespace

void Store::put(const std::string& name, long rows, long cols, std::vector<double> values) {
  if (rows < 0 || cols < 0 || static_cast<long>(values.size()) != rows * cols) {
    throw ShapeMismatchError("block " + name + ": value count does not match " + shape_text(rows, cols));
  }
  if (!blocks_.count(name)) order_.push_back(name);
  blocks_[name] = {rows, cols, std::move(values)};
}

void Store::put(const std::string& name, const nn::Mat& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
  }
  put(name, static_cast<long>(m.rows()), static_cast<long>(m.cols()), std::move(v));
}

const Block& Store::get(const std::string& name) const {
  const auto it = blocks_.find(name);
  if (it == blocks_.end()) throw ShapeMismatchError("missing parameter block " + name);
  return it->second;
}

const Block& Store::get(const std::string& name, long rows, long cols) const {
  const Block& b = get(name);
  if (b.rows != rows || b.cols != cols) {
    throw ShapeMismatchError("parameter block " + name + " has shape " + shape_text(b.rows, b.cols) +
                             ", expected " + shape_text(rows, cols));
  }
  return b;
}

std::vector<std::string> Store::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& n : order_) {
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  }
  return out;
}

void Store::write(std::ostream& out) const {
  out << kHeader << "\n";
  char buf[32];
  for (const auto& name : order_) {
    const Block& b = blocks_.at(name);
    out << "block " << name << " " << b.rows << " " << b.cols << "\n";
    for (long i = 0; i < b.rows; ++i) {
      for (long j = 0; j < b.cols; ++j) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), b.values[i * b.cols + j],
                                             std::chars_format::general, 17);
        (void)ec;
        if (j) out << ' ';
        out.write(buf, ptr - buf);
      }
      out << "\n";
    }
  }
}

Store Store::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TruncatedError("empty checkpoint");
  if (line != kHeader) throw VersionMismatchError("unsupported checkpoint header '" + line + "'");
  Store store;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream head(line);
    std::string tag, name;
    long rows = -1, cols = -1;
    if (!(head >> tag >> name >> rows >> cols) || tag != "block" || rows < 0 || cols < 0) {
      throw CheckpointError("malformed block header '" + line + "'");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(rows * cols));
    for (long i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) throw TruncatedError("checkpoint ends inside block " + name);
      std::istringstream row(line);
      std::string token;
      long n = 0;
      while (row >> token) {
        values.push_back(parse_value(token, name));
        ++n;
      }
      if (n != cols) throw TruncatedError("block " + name + " row " + std::to_string(i) + " is incomplete");
    }
    store.put(name, rows, cols, std::move(values));
  }
  return store;
}

void Store::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    write(out);
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Store Store::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read(in);
}

void put_system(Store& store, const agents::MarlSystem& system) {
  const auto prefix = system_prefix(system.system);
  for (std::size_t k = 0; k < system.tables.size(); ++k) {
    const auto& t = system.tables[k];
    store.put(prefix + std::to_string(k), agents::QTable::kStates, agents::kNumActions, t.raw());
    store.put(prefix + std::to_string(k) + ".hyper", 1, 3, {t.learning_rate, t.discount, t.exploration});
  }
}

agents::MarlSystem get_system(const Store& store, agents::System system, std::size_t num_intents) {
  agents::MarlSystem out;
  out.system = system;
  const auto prefix = system_prefix(system);
  for (std::size_t k = 0; k < num_intents; ++k) {
    const Block& b = store.get(prefix + std::to_string(k), agents::QTable::kStates, agents::kNumActions);
    agents::QTable table;
    table.raw() = b.values;
    const auto& h = store.get(prefix + std::to_string(k) + ".hyper", 1, 3).values;
    table.learning_rate = h[0];
    table.discount = h[1];
    table.exploration = h[2];
    out.tables.push_back(std::move(table));
  }
  return out;
}

void put_capabilities(Store& store, const std::vector<agents::CapabilityVector>& caps,
                      const std::string& prefix) {
  for (std::size_t i = 0; i < caps.size(); ++i) {
    const long n = static_cast<long>(caps[i].rho.size());
    std::vector<double> missing(caps[i].missing.begin(), caps[i].missing.end());
    store.put(prefix + "capability." + std::to_string(i), 1, n, caps[i].rho);
    store.put(prefix + "capability_missing." + std::to_string(i), 1, n, std::move(missing));
  }
}

std::vector<agents::CapabilityVector> get_capabilities(const Store& store, std::size_t num_agents,
                                                       const std::string& prefix) {
  std::vector<agents::CapabilityVector> out(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) {
    const Block& rho = store.get(prefix + "capability." + std::to_string(i), 1, agents::kGoalLevels);
    const Block& miss = store.get(prefix + "capability_missing." + std::to_string(i), 1, agents::kGoalLevels);
    out[i].rho = rho.values;
    for (double m : miss.values) out[i].missing.push_back(m != 0.0);
  }
  return out;
}

void put_policy(Store& store, const std::string& tag, const supervisor::SupervisorPolicy& policy) {
  const auto& s = policy.shape();
  store.put(tag + ".shape", 1, 8,
            {double(s.agents), double(s.heads), double(s.intents), double(s.levels), double(s.encoder),
             double(s.merger), double(s.fusion), double(s.hidden)});
  for (const nn::Parameter* p : policy.blocks()) store.put(tag + "." + p->name, p->value);
}

bool has_policy(const Store& store, const std::string& tag) { return store.contains(tag + ".shape"); }

supervisor::SupervisorPolicy get_policy(const Store& store, const std::string& tag) {
  const Block& sb = store.get(tag + ".shape", 1, 8);
  supervisor::PolicyShape shape;
  int* fields[] = {&shape.agents, &shape.heads,  &shape.intents, &shape.levels,
                   &shape.encoder, &shape.merger, &shape.fusion, &shape.hidden};
  for (std::size_t i = 0; i < 8; ++i) *fields[i] = static_cast<int>(sb.values[i]);
  supervisor::SupervisorPolicy policy(shape, 0);
  for (nn::Parameter* p : policy.parameters()) {
    const Block& b = store.get(tag + "." + p->name, static_cast<long>(p->value.rows()),
                               static_cast<long>(p->value.cols()));
    for (long i = 0; i < b.rows; ++i) {
      for (long j = 0; j < b.cols; ++j) p->value(i, j) = b.values[i * b.cols + j];
    }
  }
  return policy;
}

}  // namespace atmarl::checkpoint
