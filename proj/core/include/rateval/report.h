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

#ifndef RATEVAL_REPORT_H_
#define RATEVAL_REPORT_H_

#include <string>
#include <vector>

#include "rateval/scoring.h"

namespace rateval {

// metric, variant, mean, ci_lo, ci_hi, n
std::string ReportsTsv(const std::vector<ScoreReport>& reports);
// Full reports including pointwise arrays; NaN is written as "NaN".
std::string ReportsJson(const std::vector<ScoreReport>& reports,
                        const std::string& fingerprint, const std::string& tool_version);
// Metrics as rows, variants as columns.
std::string ReportsMarkdown(const std::vector<ScoreReport>& reports);

std::vector<ScoreReport> ParseReportsJson(const std::string& json_text);

}  // namespace rateval

#endif  // RATEVAL_REPORT_H_
