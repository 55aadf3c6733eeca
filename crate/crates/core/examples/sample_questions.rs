//! Prints a few generated questions per chart type for one fixture table.
//! Run from the repository root: `cargo run --example sample_questions`.

use chartcorpus::qa::generate_all;
use chartcorpus::render::render_chart;
use chartcorpus::synth::{make_chart_spec, ChartType};
use chartcorpus::table::DataTable;
use rand::SeedableRng;

fn main() {
    let t = DataTable::from_csv("gdp_growth_rate", &std::fs::read("fixtures/tables/standard/gdp_growth_rate.csv").unwrap()).unwrap();
    for ct in ChartType::ALL {
        let spec = make_chart_spec(&t, ct, 4).unwrap();
        let c = render_chart(&spec, "c").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for q in generate_all(&spec, &c.annotations, &mut rng, 8).unwrap() {
            println!("{:14} {:22} {} -> {:?}", ct.id(), q.template_id, q.question, q.answers);
        }
    }
}
