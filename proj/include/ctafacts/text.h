// Copyright 2026 The CTA Facts Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small ASCII text helpers shared by the curation pipeline and the engine.

#ifndef CTAFACTS_TEXT_H_
#define CTAFACTS_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace ctafacts::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Splits on runs of whitespace.
std::vector<std::string> split_whitespace(std::string_view s);

// Lowercased alphanumeric tokens; apostrophes inside a word are kept.
std::vector<std::string> word_tokens(std::string_view s);

// Singular candidates for a token: itself, minus a trailing "s", minus a
// trailing "es".
std::vector<std::string> plural_variants(std::string_view token);

// Equality up to a trailing "s"/"es" on either side, case-insensitive.
bool plural_tolerant_equal(std::string_view a, std::string_view b);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_word(std::string_view s, std::string_view word);

}  // namespace ctafacts::text

#endif  // CTAFACTS_TEXT_H_
