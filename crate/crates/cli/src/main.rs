// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(sog_ppa_cli::run(std::env::args_os()));
}
