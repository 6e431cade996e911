// Copyright 2026 The fluxlattice Authors
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

#pragma once

#include "fluxlattice/bands.hpp"
#include "fluxlattice/device.hpp"
#include "fluxlattice/diagnostics.hpp"
#include "fluxlattice/dynamics.hpp"
#include "fluxlattice/experiments.hpp"
#include "fluxlattice/io.hpp"
#include "fluxlattice/lattice.hpp"
#include "fluxlattice/open_system.hpp"
#include "fluxlattice/parallel.hpp"
#include "fluxlattice/protocols.hpp"
#include "fluxlattice/report.hpp"
