#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "atmarl/agents.hpp"
#include "atmarl/supervisor.hpp"

// Structured-text parameter store:
//
//   ATMARL-CKPT v1
//   block <name> <rows> <cols>
//   <rows lines of cols values, 17 significant digits>
//   ...
namespace atmarl::checkpoint {

inline constexpr const char* kHeader = "ATMARL-CKPT v1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class TruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Block {
  long rows = 0;
  long cols = 0;
  std::vector<double> values;  // row-major
};

class Store {
 public:
  void put(const std::string& name, long rows, long cols, std::vector<double> values);
  void put(const std::string& name, const nn::Mat& m);

  bool contains(const std::string& name) const { return blocks_.count(name) != 0; }
  // Throws ShapeMismatchError naming the block when absent or misshapen.
  const Block& get(const std::string& name, long rows, long cols) const;
  const Block& get(const std::string& name) const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  void write(std::ostream& out) const;
  static Store read(std::istream& in);

  void save(const std::filesystem::path& path) const;
  static Store load(const std::filesystem::path& path);

 private:
  std::map<std::string, Block> blocks_;
  std::vector<std::string> order_;
};

void put_system(Store& store, const agents::MarlSystem& system);
agents::MarlSystem get_system(const Store& store, agents::System system, std::size_t num_intents);

// Blocks "<prefix>capability.<slot>" and "<prefix>capability_missing.<slot>".
void put_capabilities(Store& store, const std::vector<agents::CapabilityVector>& caps,
                      const std::string& prefix = "");
std::vector<agents::CapabilityVector> get_capabilities(const Store& store, std::size_t num_agents,
                                                       const std::string& prefix = "");

// Policy blocks live under "<tag>.", with the layer shape in "<tag>.shape".
void put_policy(Store& store, const std::string& tag, const supervisor::SupervisorPolicy& policy);
supervisor::SupervisorPolicy get_policy(const Store& store, const std::string& tag);
bool has_policy(const Store& store, const std::string& tag);

}  // namespace atmarl::checkpoint
