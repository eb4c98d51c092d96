//! Sends one guidance request to a running diffusion bridge and prints the reply.
//! The address comes from `COMPC_BRIDGE_ADDR` (default 127.0.0.1:7631).

use std::time::Duration;

use compc::camera::RelativePose;
use compc::guidance::{BridgeProvider, GuidanceProvider, GuidanceRequest, bridge_addr_from_env, healthcheck};

fn main() {
    let addr = bridge_addr_from_env();
    if !healthcheck(&addr, Duration::from_secs(2)) {
        eprintln!("no bridge answering at {addr}");
        std::process::exit(3);
    }
    let (w, h) = (64, 64);
    let req = GuidanceRequest {
        width: w,
        height: h,
        reference: vec![0.5; 3 * w * h],
        current: vec![1.0; 3 * w * h],
        relative_pose: RelativePose { d_elevation: 15.0, d_azimuth: 90.0, d_radius: 0.0 },
        step_fraction: 0.0,
    };
    let mut bridge = BridgeProvider::new(addr).with_timeout(Duration::from_secs(120));
    match bridge.image_gradient(&req) {
        Ok(resp) => {
            let norm = resp.grad_image.iter().map(|g| g * g).sum::<f64>().sqrt();
            println!("weight {}, |grad| {norm:.4} over {} values", resp.weight, resp.grad_image.len());
        }
        Err(e) => {
            eprintln!("bridge error: {e}");
            std::process::exit(3);
        }
    }
}
