// Copyright 2026 The nugget Authors.
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

#include "nugget/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "nugget/error.hpp"

namespace nugget {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedIR: return "MalformedIR";
    case Errc::UnsupportedIR: return "UnsupportedIR";
    case Errc::UnknownBlock: return "UnknownBlock";
    case Errc::MissingEntry: return "MissingEntry";
    case Errc::BadMagic: return "BadMagic";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::BlockTableMismatch: return "BlockTableMismatch";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::NTooLarge: return "NTooLarge";
    case Errc::KOutOfRange: return "KOutOfRange";
    case Errc::SingleCluster: return "SingleCluster";
    case Errc::MissingRoi: return "MissingRoi";
    case Errc::ZeroTruth: return "ZeroTruth";
    case Errc::WorkloadMismatch: return "WorkloadMismatch";
    case Errc::ToolchainFailure: return "ToolchainFailure";
    case Errc::NonZeroExit: return "NonZeroExit";
    case Errc::Io: return "Io";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::Io, "read failed: " + path.string());
  return std::move(buf).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::Io, "cannot rename onto " + path.string());
  }
}

}  // namespace io
}  // namespace nugget
