void s291(int n, int *a, int *b) {
    int im1;
    im1 = n - 1;
    for (int i = 0; i < n; i++) {
        a[i] = (b[i] + b[im1]) * 2;
        im1 = i;
    }
}
