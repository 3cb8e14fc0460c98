fn main() {
    println!("covkern");
}
