/*
 * Copyright (C) 2026 The mvaug authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "mvaug/fixture.hpp"
#include "mvaug/geometry.hpp"
#include "mvaug/image.hpp"
#include "mvaug/io.hpp"
#include "mvaug/labels.hpp"
#include "mvaug/lighting.hpp"
#include "mvaug/math.hpp"
#include "mvaug/mesh.hpp"
#include "mvaug/panorama.hpp"
#include "mvaug/pipeline.hpp"
#include "mvaug/placement.hpp"
#include "mvaug/raster.hpp"
#include "mvaug/render.hpp"
#include "mvaug/rng.hpp"
#include "mvaug/sh.hpp"
