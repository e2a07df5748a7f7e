fn main() {
    println!("stagehand");
}
