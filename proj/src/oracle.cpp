#include "copa/oracle.hpp"

#include <algorithm>

#include "copa/json_io.hpp"
#include "httplib.h"

namespace copa::oracle {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<GroundPurpose> purpose_from_name(const std::string& name) {
  if (name == "grasping") return GroundPurpose::Grasping;
  if (name == "task_relevant") return GroundPurpose::TaskRelevant;
  return std::nullopt;
}

bool purposes_overlap(const std::optional<GroundPurpose>& a,
                      const std::optional<GroundPurpose>& b) {
  if (!a || !b) return true;
  return *a == *b;
}

}  // namespace

const char* phase_name(GroundPhase phase) {
  return phase == GroundPhase::CoarseObject ? "coarse_object" : "fine_part";
}

const char* purpose_name(GroundPurpose purpose) {
  return purpose == GroundPurpose::Grasping ? "grasping" : "task_relevant";
}

ordered_json grounding_request_to_json(const GroundingRequest& r) {
  ordered_json j;
  j["version"] = kProtocolVersion;
  j["phase"] = phase_name(r.phase);
  j["purpose"] = purpose_name(r.purpose);
  j["instruction"] = r.instruction;
  j["image_ref"] = r.image_ref;
  j["candidates"] = r.candidates;
  return j;
}

ordered_json grounding_response_to_json(const GroundingResponse& r) {
  ordered_json j;
  j["selected"] = r.selected;
  return j;
}

ordered_json constraint_request_to_json(const ConstraintRequest& r) {
  ordered_json j;
  j["version"] = kProtocolVersion;
  j["phase"] = "constraints";
  j["instruction"] = r.instruction;
  j["image_ref"] = r.image_ref;
  ordered_json elems = ordered_json::array();
  for (const auto& e : r.elements) {
    ordered_json je;
    je["id"] = e.id;
    je["kind"] = e.kind == parts::PartKind::Slender ? "vector" : "surface";
    je["name"] = e.name;
    elems.push_back(std::move(je));
  }
  j["elements"] = std::move(elems);
  return j;
}

ordered_json constraint_response_to_json(const ConstraintResponse& r) {
  ordered_json j;
  j["constraints"] = r.constraints;
  j["actions"] = r.actions;
  return j;
}

GroundingResponse grounding_response_from_json(const json& j) {
  if (!j.is_object() || !j.contains("selected") || !j["selected"].is_array()) {
    throw Error(ErrorCode::SchemaError, "grounding response needs a 'selected' id array");
  }
  GroundingResponse r;
  for (const auto& v : j["selected"]) {
    if (!v.is_number_integer()) {
      throw Error(ErrorCode::SchemaError, "grounding response ids must be integers");
    }
    r.selected.push_back(v.get<int>());
  }
  return r;
}

ConstraintResponse constraint_response_from_json(const json& j) {
  if (!j.is_object() || !j.contains("constraints") || !j["constraints"].is_array()) {
    throw Error(ErrorCode::SchemaError, "constraint response needs a 'constraints' array");
  }
  ConstraintResponse r;
  for (const auto& v : j["constraints"]) {
    if (!v.is_string()) {
      throw Error(ErrorCode::SchemaError, "constraint sentences must be strings");
    }
    r.constraints.push_back(v.get<std::string>());
  }
  if (j.contains("actions")) {
    if (!j["actions"].is_array()) {
      throw Error(ErrorCode::SchemaError, "'actions' must be an array");
    }
    for (const auto& v : j["actions"]) {
      if (!v.is_string()) {
        throw Error(ErrorCode::SchemaError, "action sentences must be strings");
      }
      r.actions.push_back(v.get<std::string>());
    }
  }
  return r;
}

OracleScript script_from_json(const json& doc, const std::string& origin) {
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorCode::SchemaError, origin + ": script needs an 'entries' array");
  }
  OracleScript script;
  for (size_t i = 0; i < doc["entries"].size(); ++i) {
    const auto& je = doc["entries"][i];
    const std::string at = origin + ".entries[" + std::to_string(i) + "]";
    if (!je.is_object() || !je.contains("phase") || !je.contains("instruction") ||
        !je.contains("response")) {
      throw Error(ErrorCode::SchemaError, at + " needs phase, instruction and response");
    }
    ScriptEntry entry;
    entry.phase = je["phase"].get<std::string>();
    if (entry.phase != "coarse_object" && entry.phase != "fine_part" &&
        entry.phase != "constraints") {
      throw Error(ErrorCode::SchemaError, at + ": unknown phase '" + entry.phase + "'");
    }
    if (je.contains("purpose")) {
      const auto p = purpose_from_name(je["purpose"].get<std::string>());
      if (!p) {
        throw Error(ErrorCode::SchemaError, at + ": unknown purpose");
      }
      entry.purpose = p;
    }
    entry.instruction = je["instruction"].get<std::string>();
    entry.response = je["response"];

    for (const ScriptEntry& prev : script.entries) {
      if (prev.phase == entry.phase && prev.instruction == entry.instruction &&
          purposes_overlap(prev.purpose, entry.purpose)) {
        throw Error(ErrorCode::DuplicateKey,
                    at + ": duplicate key (" + entry.phase + ", \"" + entry.instruction + "\")");
      }
    }
    script.entries.push_back(std::move(entry));
  }
  return script;
}

OracleScript load_script(const std::filesystem::path& path) {
  return script_from_json(json_io::load_json_file(path), path.filename().string());
}

const ScriptEntry* ScriptedOracle::find(const std::string& phase, GroundPurpose purpose,
                                        const std::string& instruction) const {
  for (const ScriptEntry& e : script_.entries) {
    if (e.phase != phase || e.instruction != instruction) continue;
    if (e.purpose && *e.purpose != purpose) continue;
    return &e;
  }
  return nullptr;
}

GroundingResponse ScriptedOracle::ground(const GroundingRequest& request) {
  if (request.candidates.empty()) {
    throw Error(ErrorCode::InvalidSelection, "grounding request has no candidates");
  }
  const ScriptEntry* entry =
      find(phase_name(request.phase), request.purpose, request.instruction);
  if (!entry) {
    throw Error(ErrorCode::ScriptMiss,
                std::string("no script entry for (") + phase_name(request.phase) + ", " +
                    purpose_name(request.purpose) + ", \"" + request.instruction + "\")");
  }
  GroundingResponse r = grounding_response_from_json(entry->response);
  for (int id : r.selected) {
    if (std::find(request.candidates.begin(), request.candidates.end(), id) ==
        request.candidates.end()) {
      throw Error(ErrorCode::InvalidSelection,
                  "scripted id " + std::to_string(id) + " is not among the candidates");
    }
  }
  return r;
}

ConstraintResponse ScriptedOracle::generate_constraints(const ConstraintRequest& request) {
  if (request.elements.empty()) {
    throw Error(ErrorCode::InvalidSelection, "constraint request has an empty element table");
  }
  // the constraints round is purpose-free; any purpose value matches
  const ScriptEntry* entry = find("constraints", GroundPurpose::TaskRelevant, request.instruction);
  if (!entry) {
    throw Error(ErrorCode::ScriptMiss,
                "no script entry for (constraints, \"" + request.instruction + "\")");
  }
  return constraint_response_from_json(entry->response);
}

HttpOracle::HttpOracle(std::string endpoint) {
  // accepted forms: http://host:port[/base]
  std::string rest = endpoint;
  const auto scheme = rest.find("://");
  if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
  const auto slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  base_path_ = slash == std::string::npos ? "" : rest.substr(slash);
  if (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  const auto colon = hostport.find(':');
  if (colon != std::string::npos) {
    host_ = hostport.substr(0, colon);
    port_ = std::stoi(hostport.substr(colon + 1));
  } else {
    host_ = hostport;
    port_ = 80;
  }
  if (host_.empty()) {
    throw Error(ErrorCode::SchemaError, "bad oracle endpoint: " + endpoint);
  }
}

nlohmann::json HttpOracle::post(const std::string& path, const json& body) {
  httplib::Client client(host_, port_);
  client.set_read_timeout(60, 0);
  const auto res = client.Post((base_path_ + path).c_str(), body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::IoError, "oracle endpoint unreachable: " + host_);
  }
  if (res->status != 200) {
    throw Error(ErrorCode::IoError,
                "oracle endpoint returned status " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("oracle response: ") + e.what());
  }
}

GroundingResponse HttpOracle::ground(const GroundingRequest& request) {
  return grounding_response_from_json(post("/ground", grounding_request_to_json(request)));
}

ConstraintResponse HttpOracle::generate_constraints(const ConstraintRequest& request) {
  return constraint_response_from_json(
      post("/constraints", constraint_request_to_json(request)));
}

ReplayOracle::ReplayOracle(const json& audit_log) {
  if (!audit_log.is_array()) {
    throw Error(ErrorCode::SchemaError, "audit log must be an array");
  }
  for (const auto& e : audit_log) entries_.push_back(e);
}

GroundingResponse ReplayOracle::ground(const GroundingRequest& request) {
  if (next_ >= entries_.size()) {
    throw Error(ErrorCode::ScriptMiss, "audit log exhausted");
  }
  const json entry = entries_[next_++];
  const json want = grounding_request_to_json(request);
  if (entry.value("kind", "") != "ground" || json(entry.at("request")) != want) {
    throw Error(ErrorCode::ScriptMiss, "grounding request does not match the recorded exchange");
  }
  return grounding_response_from_json(entry.at("response"));
}

ConstraintResponse ReplayOracle::generate_constraints(const ConstraintRequest& request) {
  if (next_ >= entries_.size()) {
    throw Error(ErrorCode::ScriptMiss, "audit log exhausted");
  }
  const json entry = entries_[next_++];
  const json want = constraint_request_to_json(request);
  if (entry.value("kind", "") != "constraints" || json(entry.at("request")) != want) {
    throw Error(ErrorCode::ScriptMiss, "constraint request does not match the recorded exchange");
  }
  return constraint_response_from_json(entry.at("response"));
}

std::shared_ptr<Oracle> make_oracle(const std::string& source) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    return std::make_shared<HttpOracle>(source);
  }
  return std::make_shared<ScriptedOracle>(load_script(source));
}

}  // namespace copa::oracle
