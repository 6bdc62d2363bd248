// Copyright 2026 The muxgel Authors
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

#pragma once

#include "muxgel/error.hpp"
#include "muxgel/image.hpp"
#include "muxgel/image_io.hpp"
#include "muxgel/random.hpp"
#include "muxgel/tactile.hpp"
#include "muxgel/pipeline.hpp"
#include "muxgel/metrics.hpp"
#include "muxgel/demux.hpp"
#include "muxgel/config.hpp"
#include "muxgel/dataset.hpp"
