// Copyright 2026 The rateval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rateval/report.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"

namespace rateval {
namespace {

using Json = nlohmann::ordered_json;

Json Num(double v) { return std::isfinite(v) ? Json(v) : Json(FormatDouble(v)); }

double FromNum(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw DataError("bad number in report: " + s);
}

template <typename T, typename F>
std::vector<T> Ordered(const std::vector<ScoreReport>& reports, F key) {
  std::vector<T> out;
  for (const ScoreReport& r : reports) {
    if (std::find(out.begin(), out.end(), key(r)) == out.end()) out.push_back(key(r));
  }
  return out;
}

}  // namespace

std::string ReportsTsv(const std::vector<ScoreReport>& reports) {
  std::string out = "metric\tvariant\tmean\tci_lo\tci_hi\tn\n";
  for (const ScoreReport& r : reports) {
    out += MetricName(r.metric) + "\t" + r.variant + "\t" + FormatDouble(r.mean) + "\t" +
           FormatDouble(r.ci.lo) + "\t" + FormatDouble(r.ci.hi) + "\t" + std::to_string(r.n) + "\n";
  }
  return out;
}

std::string ReportsJson(const std::vector<ScoreReport>& reports, const std::string& fingerprint,
                        const std::string& tool_version) {
  Json j;
  j["tool_version"] = tool_version;
  j["fingerprint"] = fingerprint;
  Json arr = Json::array();
  for (const ScoreReport& r : reports) {
    Json o;
    o["metric"] = MetricName(r.metric);
    o["variant"] = r.variant;
    o["mean"] = Num(r.mean);
    o["ci"] = {Num(r.ci.lo), Num(r.ci.hi)};
    o["n"] = r.n;
    o["units"] = r.units;
    o["fingerprint"] = r.fingerprint;
    Json d = Json::object();
    for (const auto& [k, v] : r.details) d[k] = Num(v);
    o["details"] = d;
    Json pw = Json::array();
    for (double v : r.pointwise) pw.push_back(Num(v));
    o["pointwise"] = pw;
    arr.push_back(o);
  }
  j["reports"] = arr;
  return j.dump(1) + "\n";
}

std::string ReportsMarkdown(const std::vector<ScoreReport>& reports) {
  const auto metrics = Ordered<MetricKind>(reports, [](const ScoreReport& r) { return r.metric; });
  const auto variants = Ordered<std::string>(reports, [](const ScoreReport& r) { return r.variant; });
  std::string out = "| metric |";
  for (const std::string& v : variants) out += " " + v + " |";
  out += "\n|---|";
  for (size_t i = 0; i < variants.size(); ++i) out += "---|";
  out += "\n";
  for (MetricKind m : metrics) {
    out += "| " + MetricName(m) + " |";
    for (const std::string& v : variants) {
      auto it = std::find_if(reports.begin(), reports.end(),
                             [&](const ScoreReport& r) { return r.metric == m && r.variant == v; });
      if (it == reports.end()) {
        out += " - |";
      } else if (!std::isfinite(it->mean)) {
        out += " NaN |";
      } else {
        out += " " + FormatDouble(it->mean, 3) + " [" + FormatDouble(it->ci.lo, 3) + ", " +
               FormatDouble(it->ci.hi, 3) + "] |";
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<ScoreReport> ParseReportsJson(const std::string& json_text) {
  std::vector<ScoreReport> out;
  try {
    const Json j = Json::parse(json_text);
    for (const Json& o : j.at("reports")) {
      ScoreReport r;
      r.metric = MetricFromName(o.at("metric").get<std::string>());
      r.variant = o.at("variant").get<std::string>();
      r.mean = FromNum(o.at("mean"));
      r.ci = {FromNum(o.at("ci").at(0)), FromNum(o.at("ci").at(1))};
      r.n = o.at("n").get<size_t>();
      r.units = o.at("units").get<std::string>();
      r.fingerprint = o.at("fingerprint").get<std::string>();
      for (auto& [k, v] : o.at("details").items()) r.details[k] = FromNum(v);
      for (const Json& v : o.at("pointwise")) r.pointwise.push_back(FromNum(v));
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report JSON: ") + e.what());
  }
  return out;
}

}  // namespace rateval
