//! Prints a coarse Hofstadter butterfly: one line per flux p/q, one mark per
//! band.

use gaplab::spectral::butterfly;

const WIDTH: usize = 72;

fn column(e: f64) -> usize {
    (((e + 4.0) / 8.0) * (WIDTH - 1) as f64)
        .round()
        .clamp(0.0, (WIDTH - 1) as f64) as usize
}

fn main() {
    let rows = butterfly(7, 28).expect("valid parameters");
    for group in rows.chunk_by(|a, b| (a.theta_num, a.theta_den) == (b.theta_num, b.theta_den)) {
        let mut line = [' '; WIDTH];
        for r in group {
            line[column(r.band_lo)..=column(r.band_hi)].fill('#');
        }
        let (a, q) = (group[0].theta_num, group[0].theta_den);
        println!("{a:>2}/{q:<2} |{}|", line.iter().collect::<String>());
    }
}
