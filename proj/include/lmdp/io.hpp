#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmdp/ftpedel.hpp"
#include "lmdp/instances.hpp"
#include "lmdp/offline.hpp"
#include "lmdp/verify.hpp"

namespace lmdp::io {

using json = nlohmann::ordered_json;

json to_json(const Mat& m);
json to_json(const Vec& v);
Mat mat_from_json(const json& j);
Vec vec_from_json(const json& j);

json to_json(const LinearMdp& mdp);
LinearMdp mdp_from_json(const json& j);

json to_json(const Policy& p);
Policy policy_from_json(const json& j);

/// MDP fields plus a "metadata" block (name, params, ground truth, logging policy).
json to_json(const InstanceBundle& b);
InstanceBundle bundle_from_json(const json& j);

json to_json(const VisitationProfile& p);
json to_json(const CoverageReport& r);
json to_json(const VerificationVerdict& v);
json to_json(const VerifiabilityCheck& c);

/// One record per line; steps are written 1-based.
void write_dataset(std::ostream& os, const OfflineDataset& data);
OfflineDataset read_dataset(std::istream& is);

void write_epoch_csv(std::ostream& os, const std::vector<EpochDiagnostic>& rows, bool header = true,
                     const std::string& prefix_header = "", const std::string& prefix = "");
void write_design_trace_csv(std::ostream& os, const std::vector<DesignTraceRow>& rows);

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);
OfflineDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const OfflineDataset& data);
InstanceBundle load_bundle(const std::string& path);

/// Shortest decimal that round-trips.
std::string num(double x);

}  // namespace lmdp::io
