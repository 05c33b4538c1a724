// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "flatsim/adversary.hpp"
#include "flatsim/bytes.hpp"
#include "flatsim/config.hpp"
#include "flatsim/crypto.hpp"
#include "flatsim/enclave.hpp"
#include "flatsim/envelope.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/metrics.hpp"
#include "flatsim/model.hpp"
#include "flatsim/params.hpp"
#include "flatsim/privacy.hpp"
#include "flatsim/protocol.hpp"
#include "flatsim/rng.hpp"
#include "flatsim/robust_agg.hpp"
#include "flatsim/transcript.hpp"
