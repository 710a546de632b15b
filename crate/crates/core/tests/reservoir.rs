use coreset_influence::harness::{named_rng, RngStream};
use coreset_influence::models::Sample;
use coreset_influence::selection::{select_reservoir, ReplayBuffer};

#[test]
fn inclusion_is_uniform_over_the_stream() {
    let n = 10_000usize;
    let m = 100usize;
    let seeds = 2_000u64;
    let items: Vec<Sample> = (0..n as u64).map(|i| Sample::scalar(i, i as f64)).collect();
    let mut counts = vec![0u32; n];
    for seed in 0..seeds {
        let mut rng = named_rng(seed, RngStream::Reservoir);
        let mut buffer = ReplayBuffer::new(m).unwrap();
        let mut seen = 0;
        for chunk in items.chunks(500) {
            (buffer, seen) = select_reservoir(&buffer, chunk, seen, &mut rng);
        }
        assert_eq!(buffer.len(), m);
        for id in buffer.ids() {
            counts[id as usize] += 1;
        }
    }
    let p = m as f64 / n as f64;
    let mean = seeds as f64 * p;
    let se = (seeds as f64 * p * (1.0 - p)).sqrt();
    let outside = counts.iter().filter(|&&c| (c as f64 - mean).abs() > 3.0 * se).count();
    assert!(outside * 100 <= n, "{outside} of {n} items outside 3 SE");
    let early: u32 = counts[..n / 2].iter().sum();
    let late: u32 = counts[n / 2..].iter().sum();
    let total = (early + late) as f64;
    assert!((early as f64 / total - 0.5).abs() < 0.01, "early share {}", early as f64 / total);
}

#[test]
fn same_seed_same_buffer() {
    let items: Vec<Sample> = (0..1000u64).map(|i| Sample::scalar(i, 0.0)).collect();
    let run = |seed| {
        let mut rng = named_rng(seed, RngStream::Reservoir);
        select_reservoir(&ReplayBuffer::new(20).unwrap(), &items, 0, &mut rng).0.ids()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}
