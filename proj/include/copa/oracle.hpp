#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "copa/part_model.hpp"
#include "json.hpp"

namespace copa::oracle {

/// Wire-format version for requests, responses and script files.
inline constexpr const char* kProtocolVersion = "copa-oracle/v1";

enum class GroundPhase { CoarseObject, FinePart };

/// Which grounding round is running: choosing what to grasp, or collecting
/// the task-relevant parts.
enum class GroundPurpose { Grasping, TaskRelevant };

struct GroundingRequest {
  GroundPhase phase = GroundPhase::CoarseObject;
  GroundPurpose purpose = GroundPurpose::Grasping;
  std::string instruction;
  std::string image_ref;
  std::vector<int> candidates;
};

struct GroundingResponse {
  std::vector<int> selected;
};

struct ElementSummary {
  int id = 0;
  parts::PartKind kind = parts::PartKind::Surface;
  std::string name;
};

struct ConstraintRequest {
  std::string instruction;
  std::string image_ref;
  std::vector<ElementSummary> elements;
};

struct ConstraintResponse {
  std::vector<std::string> constraints;
  std::vector<std::string> actions;
};

/// The grounding / constraint-generation intelligence. Implementations must
/// be shareable across concurrent runs.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual GroundingResponse ground(const GroundingRequest& request) = 0;
  virtual ConstraintResponse generate_constraints(const ConstraintRequest& request) = 0;
};

struct ScriptEntry {
  std::string phase;  // "coarse_object", "fine_part" or "constraints"
  std::optional<GroundPurpose> purpose;  // absent matches either purpose
  std::string instruction;
  nlohmann::json response;
};

struct OracleScript {
  std::vector<ScriptEntry> entries;
};

/// Parses and validates a script file; duplicate (phase, purpose,
/// instruction) keys are rejected, where a missing purpose collides with
/// everything.
OracleScript load_script(const std::filesystem::path& path);
OracleScript script_from_json(const nlohmann::json& doc, const std::string& origin);

/// Deterministic oracle that answers from a script. Misses and ids outside
/// the candidate set raise typed errors.
class ScriptedOracle : public Oracle {
 public:
  explicit ScriptedOracle(OracleScript script) : script_(std::move(script)) {}

  GroundingResponse ground(const GroundingRequest& request) override;
  ConstraintResponse generate_constraints(const ConstraintRequest& request) override;

 private:
  const ScriptEntry* find(const std::string& phase, GroundPurpose purpose,
                          const std::string& instruction) const;
  OracleScript script_;
};

/// Minimal HTTP client speaking the same JSON protocol: POST /ground and
/// POST /constraints against the configured endpoint.
class HttpOracle : public Oracle {
 public:
  explicit HttpOracle(std::string endpoint);

  GroundingResponse ground(const GroundingRequest& request) override;
  ConstraintResponse generate_constraints(const ConstraintRequest& request) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  std::string host_;
  int port_ = 80;
  std::string base_path_;
};

struct AuditEntry {
  std::string pipeline_phase;  // "grasp" or "motion"
  std::string kind;            // "ground" or "constraints"
  nlohmann::ordered_json request;
  nlohmann::ordered_json response;
};

/// Replays a recorded exchange log; each call must match the next entry.
class ReplayOracle : public Oracle {
 public:
  explicit ReplayOracle(const nlohmann::json& audit_log);

  GroundingResponse ground(const GroundingRequest& request) override;
  ConstraintResponse generate_constraints(const ConstraintRequest& request) override;

 private:
  std::vector<nlohmann::json> entries_;
  size_t next_ = 0;
};

// JSON codecs for the protocol (shared by the scripted, HTTP and replay
// paths, and by the audit log).
nlohmann::ordered_json grounding_request_to_json(const GroundingRequest& r);
nlohmann::ordered_json grounding_response_to_json(const GroundingResponse& r);
nlohmann::ordered_json constraint_request_to_json(const ConstraintRequest& r);
nlohmann::ordered_json constraint_response_to_json(const ConstraintResponse& r);
GroundingResponse grounding_response_from_json(const nlohmann::json& j);
ConstraintResponse constraint_response_from_json(const nlohmann::json& j);

const char* phase_name(GroundPhase phase);
const char* purpose_name(GroundPurpose purpose);

/// Creates a ScriptedOracle for .json paths or an HttpOracle for http(s)
/// endpoints.
std::shared_ptr<Oracle> make_oracle(const std::string& source);

}  // namespace copa::oracle
