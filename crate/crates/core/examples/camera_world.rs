//! Moves a camera over a synthetic image and saves what it sees.
//!
//! Usage: cargo run --example camera_world [OUT_DIR]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use visuomotor::pgm::encode_p5;
use visuomotor::world::{apply_motor, observe, CameraState, MotorCommand, NoiseModel, WorldImage};

fn main() -> visuomotor::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "camera_world_out".into());
    std::fs::create_dir_all(&out)?;

    let world = WorldImage::synthetic(512, 512, 1)?;
    std::fs::write(
        format!("{out}/world.pgm"),
        encode_p5(512, 512, world.pixels())?,
    )?;

    let noise = NoiseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut cam = CameraState::centered(&world, 32, 32)?;
    let path = "RRRRRRRRRRDDDDDDDDDDLLLLLSSSSS";
    for (i, code) in path.chars().enumerate() {
        let cmd = MotorCommand::from_code(code).expect("valid code");
        cam = apply_motor(&world, &cam, cmd);
        if i % 10 == 9 {
            let frame = observe(&world, &cam, &noise, &mut rng);
            let name = format!("{out}/view_{:02}.pgm", i + 1);
            std::fs::write(&name, encode_p5(32, 32, frame.values())?)?;
            println!(
                "{name}: camera top-left ({}, {}), center {:?}",
                cam.x,
                cam.y,
                cam.center()
            );
        }
    }

    // The camera clamps at the border instead of leaving the image.
    let mut edge = CameraState::new(&world, 0, 0, 32, 32)?;
    edge = apply_motor(&world, &edge, MotorCommand::Up);
    println!("Up from the top edge stays at ({}, {})", edge.x, edge.y);
    Ok(())
}
