// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 kgrobust contributors

#pragma once

namespace kgrobust::detail {

extern const char* const kVerbalizeTemplate;
extern const char* const kAdversarializeTemplate;
extern const char* const kFewShotTemplate;
extern const char* const kClassifyTemplate;
extern const char* const kTemplateVersion;

}  // namespace kgrobust::detail
