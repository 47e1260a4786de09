//! Print the ray reduction ratio of each built-in panel for area widths 1 to 4.
//!
//! `cargo run --release --example beta_table -- 7.9 15.6`

use std::time::Instant;

use raylight::display::viewpoint_matrix;
use raylight::repurpose::build_index_matrix;
use raylight::DisplayProfile;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let names: Vec<&str> = if args.is_empty() {
        vec!["7.9", "15.6", "65"]
    } else {
        args.iter().map(String::as_str).collect()
    };
    for name in names {
        let Some(profile) = DisplayProfile::builtin(name) else {
            eprintln!("unknown profile {name}");
            std::process::exit(1);
        };
        let views = viewpoint_matrix(&profile);
        for pw in 1..=4 {
            let t = Instant::now();
            let m = build_index_matrix(&profile, &views, pw).expect("built-in profiles are valid");
            println!(
                "{name:>5} pw={pw} beta={:.4} ({:.1}s)",
                m.beta(),
                t.elapsed().as_secs_f64()
            );
        }
    }
}
