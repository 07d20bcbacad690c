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

#ifndef RATEVAL_IO_H_
#define RATEVAL_IO_H_

#include <string>
#include <string_view>

namespace rateval {

// Writes to a sibling temp file and renames over `path`. Creates parent
// directories.
void WriteFileAtomic(const std::string& path, std::string_view contents);

// Throws DataError when the file cannot be read.
std::string ReadFile(const std::string& path);

bool FileExists(const std::string& path);

// Fixed-precision decimal rendering used by every text report ("NaN" for NaN).
std::string FormatDouble(double value, int precision = 6);

}  // namespace rateval

#endif  // RATEVAL_IO_H_
