/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of scakit, a side-channel analysis toolkit.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace scakit {

/// Base class for all scakit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad arguments, wrong dtype, ...).
struct UsageError : Error {
    using Error::Error;
};

/// A file is not in the expected format (bad magic, unsupported version, ...).
struct FormatError : Error {
    using Error::Error;
};

/// A file is structurally damaged (truncation, inconsistent sizes, ...).
struct IntegrityError : Error {
    using Error::Error;
};

/// A configuration file could not be parsed or is missing required keys.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace scakit
