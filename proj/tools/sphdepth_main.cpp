/*
 * Copyright (c) 2026, the spheredepth authors.
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
 */

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "sphdepth/error.hpp"

int main(int argc, char** argv) {
  using namespace sphdepth;
  CLI::App app{"Spherical depth estimation toolkit"};
  app.require_subcommand(1);
  cli::register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return cli::kExitNumeric;
  } catch (const EmptyMaskError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return cli::kExitNumeric;
  } catch (const DegenerateInput& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return cli::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitInput;
  }
  return cli::kExitOk;
}
